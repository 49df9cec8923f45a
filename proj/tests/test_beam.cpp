#include <doctest.h>

#include <cmath>
#include <functional>

#include "ktlab/error.hpp"
#include "ktlab/seq/beam.hpp"
#include "oracles.hpp"

using namespace ktlab;
using namespace ktlab::seq;

namespace {

// Log-probability of an arbitrary token string, from raw logits.
double raw_logprob(const ModelParams& m, const std::vector<TokenId>& src,
                   const std::vector<TokenId>& seq) {
  const auto pass = teacher_forced(m, src, seq);
  double s = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    std::vector<double> z(pass.logits[t].data(), pass.logits[t].data() + pass.logits[t].size());
    s += std::log(oracle::softmax(z)[seq[t]]);
  }
  return s;
}

}  // namespace

TEST_CASE("beam of one equals greedy decoding") {
  const ModelDims dims{9, 9, 6};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto m = ModelParams::random(dims, seed, 1.5);
    const std::vector<TokenId> src{3, 4, 5 + static_cast<TokenId>(seed % 4)};
    BeamConfig cfg;
    cfg.beam_size = 1;
    cfg.max_length = 8;
    const auto hyps = beam_search(m, src, cfg);
    REQUIRE(hyps.size() == 1);
    CHECK(hyps[0].tokens == greedy_decode(m, src, 8));
  }
}

TEST_CASE("full-width beam finds the exhaustive optimum") {
  const ModelDims dims{5, 5, 3};
  const int L = 3;
  for (double alpha : {0.0, 1.0}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto m = ModelParams::random(dims, seed, 2.0);
      const std::vector<TokenId> src{3, 4};
      // Every finished string: ends in EOS at length <= L, or is cut at length L.
      double best = -INFINITY;
      std::vector<TokenId> arg;
      std::function<void(std::vector<TokenId>)> walk = [&](std::vector<TokenId> s) {
        if (!s.empty() && (s.back() == Vocab::kEos || static_cast<int>(s.size()) == L)) {
          const double score = raw_logprob(m, src, s) / std::pow(static_cast<double>(s.size()), alpha);
          if (score > best) best = score, arg = s;
          return;
        }
        for (TokenId y = 0; y < 5; ++y) {
          auto n = s;
          n.push_back(y);
          walk(n);
        }
      };
      walk({});
      BeamConfig cfg;
      cfg.beam_size = 125;
      cfg.max_length = L;
      cfg.length_penalty = alpha;
      const auto hyps = beam_search(m, src, cfg);
      REQUIRE(!hyps.empty());
      CHECK(hyps[0].tokens == arg);
      CHECK(hyps[0].score == doctest::Approx(best).epsilon(1e-12));
      for (std::size_t i = 1; i < hyps.size(); ++i) CHECK(hyps[i - 1].score >= hyps[i].score);
    }
  }
}

TEST_CASE("expansions conserve probability mass") {
  const auto m = ModelParams::random({7, 7, 4}, 3, 1.2);
  const DecodingContext ctx(m, std::vector<TokenId>{3, 6});
  auto frontier = std::vector<PartialHypothesis>{ctx.root()};
  for (int depth = 0; depth < 3; ++depth) {
    std::vector<PartialHypothesis> next;
    for (const auto& h : frontier) {
      double mass = 0;
      for (auto& c : ctx.expand(h)) {
        mass += std::exp(c.logprob);
        next.push_back(std::move(c));
      }
      CHECK(mass == doctest::Approx(std::exp(h.logprob)).epsilon(1e-12));
    }
    frontier = std::move(next);
  }
  double total = 0;
  for (const auto& h : frontier) total += std::exp(h.logprob);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hypothesis log-probabilities match teacher forcing") {
  const auto m = ModelParams::random({9, 9, 5}, 4, 1.0);
  const std::vector<TokenId> src{3, 7, 8};
  BeamConfig cfg;
  cfg.max_length = 6;
  for (const auto& h : beam_search(m, src, cfg)) {
    CHECK(h.logprob == doctest::Approx(raw_logprob(m, src, h.tokens)).epsilon(1e-12));
    CHECK(h.score == doctest::Approx(length_penalized(h.logprob, h.tokens.size(), 1.0)));
  }
}

TEST_CASE("beam config validation") {
  const auto m = ModelParams::random({5, 5, 2}, 1);
  BeamConfig cfg;
  cfg.beam_size = 0;
  CHECK_THROWS_AS(beam_search(m, std::vector<TokenId>{3}, cfg), InvalidArgument);
  cfg = {};
  cfg.length_penalty = NAN;
  CHECK_THROWS_AS(beam_search(m, std::vector<TokenId>{3}, cfg), InvalidArgument);
  CHECK_THROWS_AS(beam_search(m, std::vector<TokenId>{}, BeamConfig{}), InvalidArgument);
  CHECK_THROWS_AS(greedy_decode(m, std::vector<TokenId>{3}, 0), InvalidArgument);
}
