#include "ktlab/metrics/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "ktlab/error.hpp"

namespace ktlab::metrics {
namespace {

constexpr double kEpsilon = 1e-9;

using NgramCounts = std::map<std::vector<seq::TokenId>, int>;

NgramCounts count_ngrams(const Sentence& s, int n) {
  NgramCounts out;
  if (static_cast<int>(s.size()) < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++out[std::vector<seq::TokenId>(s.begin() + i, s.begin() + i + n)];
  }
  return out;
}

}  // namespace

BleuStats::BleuStats(int max_n) : matches(max_n, 0.0), totals(max_n, 0.0) {
  if (max_n < 1) throw InvalidArgument("bleu: max_n must be >= 1");
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  if (other.matches.size() != matches.size()) throw InvalidArgument("bleu: max_n mismatch");
  for (std::size_t n = 0; n < matches.size(); ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hypothesis_length += other.hypothesis_length;
  reference_length += other.reference_length;
  return *this;
}

double BleuStats::score() const {
  if (hypothesis_length == 0.0 || matches[0] == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < matches.size(); ++n) {
    const double p = totals[n] > 0.0 ? matches[n] / totals[n] : 0.0;
    log_sum += std::log(p > 0.0 ? p : kEpsilon);
  }
  const double log_bp = hypothesis_length < reference_length
                            ? 1.0 - reference_length / hypothesis_length
                            : 0.0;
  const double v = 100.0 * std::exp(log_bp + log_sum / static_cast<double>(matches.size()));
  return std::clamp(v, 0.0, 100.0);
}

BleuStats sentence_stats(std::span<const seq::TokenId> hypothesis,
                         std::span<const Sentence> references, int max_n) {
  if (references.empty()) throw InvalidArgument("bleu: hypothesis has no references");
  const Sentence hyp = seq::strip_specials(hypothesis);
  std::vector<Sentence> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(seq::strip_specials(r));

  BleuStats st(max_n);
  st.hypothesis_length = static_cast<double>(hyp.size());
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = std::llabs(static_cast<long long>(r.size()) - static_cast<long long>(hyp.size()));
    const auto db = std::llabs(static_cast<long long>(best) - static_cast<long long>(hyp.size()));
    if (d < db || (d == db && r.size() < best)) best = r.size();
  }
  st.reference_length = static_cast<double>(best);

  for (int n = 1; n <= max_n; ++n) {
    const auto h = count_ngrams(hyp, n);
    NgramCounts max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : count_ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    double m = 0.0;
    double t = 0.0;
    for (const auto& [g, c] : h) {
      t += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) m += std::min(c, it->second);
    }
    st.matches[n - 1] = m;
    st.totals[n - 1] = t;
  }
  return st;
}

double bleu(std::span<const Sentence> hypotheses, std::span<const std::vector<Sentence>> references,
            int max_n) {
  if (hypotheses.empty()) throw InvalidArgument("bleu: empty corpus");
  if (hypotheses.size() != references.size()) {
    throw InvalidArgument("bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                          std::to_string(references.size()) + " reference sets");
  }
  BleuStats total(max_n);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    total += sentence_stats(hypotheses[i], references[i], max_n);
  }
  return total.score();
}

}  // namespace ktlab::metrics
