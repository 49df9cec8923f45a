#pragma once

#include <span>
#include <vector>

#include "ktlab/seq/vocab.hpp"

namespace ktlab::metrics {

using Sentence = std::vector<seq::TokenId>;

/// Sufficient statistics of corpus BLEU; they add across sentences.
struct BleuStats {
  std::vector<double> matches;  // clipped n-gram matches, n = 1..max_n
  std::vector<double> totals;   // hypothesis n-grams
  double hypothesis_length = 0.0;
  double reference_length = 0.0;  // closest reference length, summed

  explicit BleuStats(int max_n = 4);
  BleuStats& operator+=(const BleuStats& other);
  /// 0..100. Exactly 0 with no unigram match; other zero precisions are floored at 1e-9.
  double score() const;
};

/// Statistics for one hypothesis against its references. Specials are stripped first.
BleuStats sentence_stats(std::span<const seq::TokenId> hypothesis,
                         std::span<const Sentence> references, int max_n = 4);

/// Corpus-level BLEU: clipped n-gram precisions pooled over the corpus, geometric mean,
/// brevity penalty against the closest reference length (shorter wins ties).
double bleu(std::span<const Sentence> hypotheses, std::span<const std::vector<Sentence>> references,
            int max_n = 4);

}  // namespace ktlab::metrics
