#include "ktlab/seq/beam.hpp"

#include <algorithm>
#include <cmath>

#include "ktlab/error.hpp"

namespace ktlab::seq {

void BeamConfig::validate() const {
  if (beam_size < 1) throw InvalidArgument("beam: beam_size must be >= 1");
  if (max_length < 1) throw InvalidArgument("beam: max_length must be >= 1");
  if (!std::isfinite(length_penalty)) throw InvalidArgument("beam: length_penalty must be finite");
}

DecodingContext::DecodingContext(const ModelParams& params, std::span<const TokenId> source)
    : params_(params) {
  if (source.empty()) throw InvalidArgument("decode: empty source");
  context_ = encode(params, source).context();
}

PartialHypothesis DecodingContext::root() const {
  return {{}, 0.0, context_, Vocab::kBos};
}

Categorical DecodingContext::next_token_dist(const PartialHypothesis& hyp) const {
  return token_dist(params_, transition(params_, hyp.prev_hidden, hyp.last_token, context_));
}

std::vector<PartialHypothesis> DecodingContext::expand(const PartialHypothesis& hyp) const {
  const Vec h = transition(params_, hyp.prev_hidden, hyp.last_token, context_);
  const Vec z = output_logits(params_, h);
  const double lse = log_sum_exp(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())));
  std::vector<PartialHypothesis> out;
  out.reserve(static_cast<std::size_t>(z.size()));
  for (Eigen::Index y = 0; y < z.size(); ++y) {
    PartialHypothesis child;
    child.tokens = hyp.tokens;
    child.tokens.push_back(static_cast<TokenId>(y));
    child.logprob = hyp.logprob + (z[y] - lse);
    child.prev_hidden = h;
    child.last_token = static_cast<TokenId>(y);
    out.push_back(std::move(child));
  }
  return out;
}

double length_penalized(double logprob, std::size_t length, double alpha) {
  return logprob / std::pow(static_cast<double>(std::max<std::size_t>(length, 1)), alpha);
}

std::vector<Hypothesis> beam_search(const ModelParams& params, std::span<const TokenId> source,
                                    const BeamConfig& cfg) {
  cfg.validate();
  const DecodingContext ctx(params, source);
  const auto beam = static_cast<std::size_t>(cfg.beam_size);
  std::vector<PartialHypothesis> alive{ctx.root()};
  std::vector<Hypothesis> finished;

  auto finish = [&](PartialHypothesis&& h) {
    const double score = length_penalized(h.logprob, h.tokens.size(), cfg.length_penalty);
    finished.push_back({std::move(h.tokens), h.logprob, score});
  };

  for (int step = 0; step < cfg.max_length && !alive.empty(); ++step) {
    std::vector<PartialHypothesis> candidates;
    for (const auto& h : alive) {
      auto ext = ctx.expand(h);
      std::move(ext.begin(), ext.end(), std::back_inserter(candidates));
    }
    // Candidates arrive in (beam, token) order, so a stable sort keeps that as tie-break.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const PartialHypothesis& a, const PartialHypothesis& b) {
                       return a.logprob > b.logprob;
                     });
    if (candidates.size() > beam) candidates.resize(beam);
    alive.clear();
    const bool last_step = step + 1 == cfg.max_length;
    for (auto& c : candidates) {
      if (c.last_token == Vocab::kEos || last_step) {
        finish(std::move(c));
      } else {
        alive.push_back(std::move(c));
      }
    }
  }

  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  if (finished.size() > beam) finished.resize(beam);
  return finished;
}

std::vector<TokenId> greedy_decode(const ModelParams& params, std::span<const TokenId> source,
                                   int max_length) {
  if (max_length < 1) throw InvalidArgument("greedy: max_length must be >= 1");
  if (source.empty()) throw InvalidArgument("decode: empty source");
  const Vec context = encode(params, source).context();
  Vec prev = context;
  TokenId last = Vocab::kBos;
  std::vector<TokenId> out;
  for (int step = 0; step < max_length; ++step) {
    Vec h = transition(params, prev, last, context);
    const Categorical dist = token_dist(params, h);
    last = static_cast<TokenId>(top_k_indices(dist.probs(), 1).front());
    out.push_back(last);
    prev = std::move(h);
    if (last == Vocab::kEos) break;
  }
  return out;
}

}  // namespace ktlab::seq
