#include "ktlab/metrics/dialog.hpp"

#include <algorithm>
#include <cstdio>

#include "ktlab/error.hpp"

namespace ktlab::metrics {
namespace {

std::vector<DialogEntry> view(const Categorical& proposer, const Categorical& reply, std::size_t m) {
  std::vector<DialogEntry> out;
  for (auto i : top_k_indices(proposer.probs(), std::min(m, proposer.size()))) {
    if (proposer[i] <= 0.0) break;
    out.push_back({static_cast<seq::TokenId>(i), proposer[i], reply[i]});
  }
  return out;
}

std::string row(const seq::Vocab& vocab, const DialogEntry& e) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "  %-12s %8.4f %8.4f\n", vocab.token(e.token).c_str(),
                e.proposer_prob, e.reply_prob);
  return buf;
}

}  // namespace

DialogTrace dialog_trace(const seq::ModelParams& learner, const train::TeacherEvaluator& teacher,
                         const seq::SentencePair& pair, std::size_t position, std::size_t top_m) {
  if (position >= pair.target.size()) {
    throw InvalidArgument("dialog: position " + std::to_string(position) +
                          " out of range for target of length " + std::to_string(pair.target.size()));
  }
  if (top_m < 1) throw InvalidArgument("dialog: top_m must be >= 1");
  if (teacher.vocab_size() != learner.dims().target_vocab) {
    throw InvalidArgument("dialog: teacher and learner vocab differ");
  }
  const auto p = seq::position_dists(learner, pair.source, pair.target);
  const auto q = teacher.position_dists(pair);
  DialogTrace tr;
  tr.position = position;
  tr.reference = pair.target[position];
  tr.ka_view = view(p[position], q[position], top_m);
  tr.kd_view = view(q[position], p[position], top_m);
  return tr;
}

std::string DialogTrace::render(const seq::Vocab& vocab) const {
  std::string out = "position " + std::to_string(position) + " reference " + vocab.token(reference) + "\n";
  out += "KA learner proposes      p        q\n";
  for (const auto& e : ka_view) out += row(vocab, e);
  out += "KD teacher proposes      q        p\n";
  for (const auto& e : kd_view) out += row(vocab, e);
  return out;
}

}  // namespace ktlab::metrics
