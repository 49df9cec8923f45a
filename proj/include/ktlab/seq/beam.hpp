#pragma once

#include <span>
#include <vector>

#include "ktlab/seq/model.hpp"

namespace ktlab::seq {

struct BeamConfig {
  int beam_size = 6;
  /// Finished hypotheses are ranked by logprob / length^length_penalty.
  double length_penalty = 1.0;
  int max_length = 32;

  void validate() const;
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // ends with EOS unless cut at max_length
  double logprob = 0.0;
  double score = 0.0;  // length-penalized
};

/// A partial hypothesis plus the decoder state needed to extend it.
struct PartialHypothesis {
  std::vector<TokenId> tokens;
  double logprob = 0.0;
  Vec prev_hidden;
  TokenId last_token = Vocab::kBos;
};

/// Read-only decoding state for one source sentence. Safe to share across threads.
class DecodingContext {
 public:
  DecodingContext(const ModelParams& params, std::span<const TokenId> source);

  PartialHypothesis root() const;
  /// Every one-token extension of `hyp`, in token-id order.
  std::vector<PartialHypothesis> expand(const PartialHypothesis& hyp) const;
  Categorical next_token_dist(const PartialHypothesis& hyp) const;

 private:
  const ModelParams& params_;
  Vec context_;
};

double length_penalized(double logprob, std::size_t length, double alpha);

/// Keeps the B best partial sequences; each step expands all of them over the full
/// vocabulary and keeps the B highest-scoring expansions (ties by lower beam, then lower
/// token id). Expansions ending in EOS are set aside as finished. Returns up to B
/// hypotheses sorted by penalized score.
std::vector<Hypothesis> beam_search(const ModelParams& params, std::span<const TokenId> source,
                                    const BeamConfig& cfg);

/// Argmax decoding, lowest token id on ties.
std::vector<TokenId> greedy_decode(const ModelParams& params, std::span<const TokenId> source,
                                   int max_length);

}  // namespace ktlab::seq
