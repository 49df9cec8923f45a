#include <doctest.h>

#include <cmath>
#include <map>

#include "ktlab/error.hpp"
#include "ktlab/seq/corpus.hpp"

using namespace ktlab;
using namespace ktlab::seq;

namespace {

GenSpec spec_with(double noise, std::uint64_t seed = 3) {
  GeneratorParams g;
  g.source_tokens = 8;
  g.groups = 6;
  g.noise = noise;
  g.seed = seed;
  return make_gen_spec(g);
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const auto a = synth_corpus(spec_with(0.1), 300);
  const auto b = synth_corpus(spec_with(0.1), 300);
  CHECK(a.train == b.train);
  CHECK(a.valid == b.valid);
  CHECK(a.test == b.test);
  const auto c = synth_corpus(spec_with(0.1, 4), 300);
  CHECK(a.train != c.train);
}

TEST_CASE("80/10/10 split and pair shape") {
  const auto spec = spec_with(0.05);
  const auto c = synth_corpus(spec, 1000);
  CHECK(c.train.size() == 800);
  CHECK(c.valid.size() == 100);
  CHECK(c.test.size() == 100);
  for (const auto& p : c.train) {
    p.validate(c.source_vocab.size(), c.target_vocab.size());
    CHECK(p.target.size() == p.source.size() + 1);
    CHECK(static_cast<int>(p.source.size()) >= spec.min_length);
    CHECK(static_cast<int>(p.source.size()) <= spec.max_length);
  }
}

TEST_CASE("noise 0 with singleton groups is a deterministic mapping") {
  GeneratorParams g;
  g.source_tokens = 6;
  g.groups = 6;
  g.max_group_size = 1;
  g.noise = 0.0;
  const auto spec = make_gen_spec(g);
  const auto c = synth_corpus(spec, 200);
  for (const auto& p : c.train) {
    for (std::size_t t = 0; t < p.source.size(); ++t) CHECK(p.target[t] == p.source[t]);
  }
}

TEST_CASE("empirical emissions agree with the oracle") {
  const auto spec = spec_with(0.1, 9);
  const OracleTeacher oracle(spec);
  const auto c = synth_corpus(spec, 20000);
  const int V = oracle.vocab_size();
  std::map<TokenId, std::vector<double>> counts;
  std::map<TokenId, double> totals;
  for (const auto& p : c.train) {
    for (std::size_t t = 0; t < p.source.size(); ++t) {
      auto& row = counts[p.source[t]];
      row.resize(static_cast<std::size_t>(V));
      row[static_cast<std::size_t>(p.target[t])] += 1;
      totals[p.source[t]] += 1;
    }
  }
  REQUIRE(counts.size() == 8);
  for (const auto& [s, row] : counts) {
    const auto q = oracle.next_token(std::vector<TokenId>{s}, {});
    const double n = totals[s];
    for (int v = 0; v < V; ++v) {
      const double p = q[static_cast<std::size_t>(v)];
      const double sigma = std::sqrt(p * (1 - p) / n);
      // 4 sigma: about 150 comparisons are made here.
      CHECK(std::abs(row[static_cast<std::size_t>(v)] / n - p) <= 4 * sigma + 1e-12);
    }
  }
}

TEST_CASE("oracle next-token distributions") {
  const auto spec = spec_with(0.0);
  const OracleTeacher oracle(spec);
  const std::vector<TokenId> src{3, 4};
  const auto q0 = oracle.next_token(src, {});
  double sum = 0;
  for (double v : q0.probs()) sum += v;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(q0[Vocab::kEos] == 0.0);

  // A prefix the process can produce, then EOS is certain.
  TokenId y0 = 0, y1 = 0;
  for (int v = 3; v < oracle.vocab_size(); ++v) {
    if (q0[static_cast<std::size_t>(v)] > 0 && y0 == 0) y0 = v;
  }
  const auto q1 = oracle.next_token(src, std::vector<TokenId>{y0});
  for (int v = 3; v < oracle.vocab_size(); ++v) {
    if (q1[static_cast<std::size_t>(v)] > 0 && y1 == 0) y1 = v;
  }
  const auto end = oracle.next_token(src, std::vector<TokenId>{y0, y1});
  CHECK(end[Vocab::kEos] == 1.0);
  CHECK_THROWS_AS(oracle.next_token(src, std::vector<TokenId>{y0, y1, Vocab::kEos}), InvalidArgument);
  CHECK_THROWS_AS(oracle.next_token(src, std::vector<TokenId>{Vocab::kEos}), InvalidArgument);

  // Without noise, a token outside the meaning class has zero probability.
  TokenId bad = 0;
  for (int v = 3; v < oracle.vocab_size(); ++v) {
    if (q0[static_cast<std::size_t>(v)] == 0) bad = v;
  }
  REQUIRE(bad != 0);
  CHECK_THROWS_AS(oracle.next_token(src, std::vector<TokenId>{bad}), InvalidArgument);
}

TEST_CASE("position_dists follow the reference prefix") {
  const auto spec = spec_with(0.2);
  const OracleTeacher oracle(spec);
  const auto c = synth_corpus(spec, 50);
  const auto& p = c.train.front();
  const auto dists = oracle.position_dists(p.source, p.target);
  REQUIRE(dists.size() == p.target.size());
  CHECK(dists.back()[Vocab::kEos] == 1.0);
  for (std::size_t t = 0; t + 1 < dists.size(); ++t) CHECK(dists[t][static_cast<std::size_t>(p.target[t])] > 0);
}

TEST_CASE("tsv and vocab text round trip") {
  const auto c = synth_corpus(spec_with(0.1), 100);
  const auto text = corpus_to_tsv(c.train, c.source_vocab, c.target_vocab);
  CHECK(corpus_from_tsv(text, c.source_vocab, c.target_vocab) == c.train);
  CHECK(corpus_from_tsv("\n" + text + "\n\n", c.source_vocab, c.target_vocab) == c.train);
  CHECK_THROWS_AS(corpus_from_tsv("s0 s1\n", c.source_vocab, c.target_vocab), InvalidArgument);
  CHECK_THROWS_AS(corpus_from_tsv("s0\tnope\n", c.source_vocab, c.target_vocab), InvalidArgument);
  CHECK(vocab_from_text(vocab_to_text(c.target_vocab)) == c.target_vocab);
}

TEST_CASE("spec validation") {
  GeneratorParams g;
  g.noise = 1.0;
  CHECK_THROWS_AS(make_gen_spec(g), InvalidArgument);
  g = {};
  g.min_length = 4;
  g.max_length = 3;
  CHECK_THROWS_AS(make_gen_spec(g), InvalidArgument);
  auto spec = spec_with(0.0);
  spec.emissions[0][0] += 0.5;
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec = spec_with(0.0);
  CHECK_THROWS_AS(synth_corpus(spec, 0), InvalidArgument);
}
