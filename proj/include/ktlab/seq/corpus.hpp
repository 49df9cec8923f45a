#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ktlab/categorical.hpp"
#include "ktlab/seq/vocab.hpp"

namespace ktlab::seq {

/// Closed-form generative process for a synthetic translation task.
///
/// A source sentence is a uniform draw of L content tokens, L uniform in
/// [min_length, max_length]. Target position t < L realizes the meaning class of source
/// token t: with probability 1 - noise a synonym is drawn from that class's emission
/// distribution, otherwise a uniform target content token. Position L is EOS.
struct GenSpec {
  int source_content = 0;
  /// Partition of the target content indices (0-based, excluding reserved ids).
  std::vector<std::vector<int>> synonym_groups;
  /// Per group, a distribution over its members (same order).
  std::vector<std::vector<double>> emissions;
  /// Meaning class of each source content token.
  std::vector<int> source_to_group;
  int min_length = 2;
  int max_length = 5;
  double noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  int target_content() const;
  Vocab source_vocab() const;
  Vocab target_vocab() const;
};

/// Compact knobs from which a GenSpec is drawn.
struct GeneratorParams {
  int source_tokens = 12;
  int groups = 12;
  int min_group_size = 1;
  int max_group_size = 4;
  /// Emission weight of the r-th synonym is proportional to 1 / (r + 1)^skew.
  double emission_skew = 1.0;
  int min_length = 2;
  int max_length = 5;
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

GenSpec make_gen_spec(const GeneratorParams& params);

struct Corpus {
  Vocab source_vocab;
  Vocab target_vocab;
  std::vector<SentencePair> train;
  std::vector<SentencePair> valid;
  std::vector<SentencePair> test;
};

/// n_pairs draws from the process, split 80/10/10 (train/valid/test) in draw order.
Corpus synth_corpus(const GenSpec& spec, std::size_t n_pairs);

/// Exact q(y_t | y_<t, x) of the generative process.
class OracleTeacher {
 public:
  explicit OracleTeacher(GenSpec spec);

  /// Throws if the prefix cannot occur under the process for this source.
  Categorical next_token(std::span<const TokenId> source, std::span<const TokenId> prefix) const;
  /// next_token at every position of pair.target under its own reference prefix.
  std::vector<Categorical> position_dists(std::span<const TokenId> source,
                                          std::span<const TokenId> target) const;
  const GenSpec& spec() const noexcept { return spec_; }
  int vocab_size() const noexcept { return vocab_size_; }

 private:
  std::vector<double> content_dist(TokenId source_token) const;

  GenSpec spec_;
  int vocab_size_;
};

/// One pair per line: source tokens, a tab, target tokens (EOS omitted).
std::string corpus_to_tsv(std::span<const SentencePair> pairs, const Vocab& source_vocab,
                          const Vocab& target_vocab);
/// Inverse of corpus_to_tsv; EOS is appended to every target. Blank lines are skipped.
std::vector<SentencePair> corpus_from_tsv(const std::string& text, const Vocab& source_vocab,
                                          const Vocab& target_vocab);

/// Content tokens one per line.
std::string vocab_to_text(const Vocab& vocab);
Vocab vocab_from_text(const std::string& text);

}  // namespace ktlab::seq
