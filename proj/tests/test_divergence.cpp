#include <doctest.h>

#include <cmath>
#include <random>

#include "ktlab/divergence.hpp"
#include "ktlab/error.hpp"
#include "oracles.hpp"

using namespace ktlab;

namespace {

const DivergenceMode kModes[] = {DivergenceMode::forward(), DivergenceMode::backward(),
                                 DivergenceMode::jsd(0.5), DivergenceMode::jsd(0.2)};

std::vector<double> vec(const Categorical& c) { return {c.probs().begin(), c.probs().end()}; }

// Truncated objective written out directly from the definition.
double truncated_oracle(const std::vector<double>& p, const std::vector<double>& q,
                        const std::vector<std::size_t>& keep, DivergenceMode mode, TruncatedForm form) {
  long double f = 0, b = 0;
  for (auto i : keep) {
    f += q[i] * std::log(static_cast<long double>(q[i]) / p[i]);
    b += p[i] * std::log(static_cast<long double>(p[i]) / q[i]);
    if (form == TruncatedForm::Relaxed) {
      f += p[i] - q[i];
      b += q[i] - p[i];
    }
  }
  return static_cast<double>(mode.forward_weight() * f + mode.backward_weight() * b);
}

}  // namespace

TEST_CASE("mode names round-trip") {
  for (const auto& m : kModes) CHECK(DivergenceMode::parse(m.name()) == m);
  CHECK(DivergenceMode::parse("kd") == DivergenceMode::forward());
  CHECK(DivergenceMode::parse("ka") == DivergenceMode::backward());
  CHECK_THROWS_AS(DivergenceMode::parse("sideways"), InvalidArgument);
  CHECK_THROWS_AS(DivergenceMode::jsd(1.5), InvalidArgument);
}

TEST_CASE("divergence of a distribution from itself is zero") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const Categorical p(oracle::random_simplex(rng, 2 + t % 9));
    for (const auto& m : kModes) CHECK(divergence(p, p, m) == 0.0);
  }
}

TEST_CASE("backward divergence on a two-point example") {
  const Categorical p({0.4, 0.6});
  const Categorical q({0.5, 0.5});
  const double expected = 0.4 * std::log(0.8) + 0.6 * std::log(1.2);
  CHECK(divergence(p, q, DivergenceMode::backward()) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("divergences agree with direct summation and decompose for jsd") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 300; ++t) {
    const auto pv = oracle::random_simplex(rng, 2 + t % 20, 1e-3);
    const auto qv = oracle::random_simplex(rng, pv.size(), 1e-3);
    const Categorical p(pv), q(qv);
    const double f = divergence(p, q, DivergenceMode::forward());
    const double b = divergence(p, q, DivergenceMode::backward());
    CHECK(std::abs(f - oracle::kl(qv, pv)) < 1e-13);
    CHECK(std::abs(b - oracle::kl(pv, qv)) < 1e-13);
    CHECK(f >= 0.0);
    CHECK(b >= 0.0);
    CHECK(std::abs(divergence(p, q, DivergenceMode::jsd(0.5)) - (0.5 * b + 0.5 * f)) < 1e-15);
    CHECK(std::abs(divergence(p, q, DivergenceMode::jsd(0.5)) - divergence(q, p, DivergenceMode::jsd(0.5))) < 1e-12);
  }
}

TEST_CASE("asymmetry witness") {
  const Categorical p({0.7, 0.2, 0.1});
  const Categorical q({0.2, 0.3, 0.5});
  CHECK(divergence(p, q, DivergenceMode::forward()) != doctest::Approx(divergence(p, q, DivergenceMode::backward())));
}

TEST_CASE("zeros are rejected with the offending index") {
  const Categorical p({0.5, 0.5, 0.0});
  const Categorical q({0.5, 0.0, 0.5});
  try {
    (void)divergence(p, q, DivergenceMode::backward());
    FAIL("expected ZeroProbability");
  } catch (const ZeroProbability& e) {
    CHECK(e.index() == 1);
  }
  try {
    (void)divergence(p, q, DivergenceMode::forward());
    FAIL("expected ZeroProbability");
  } catch (const ZeroProbability& e) {
    CHECK(e.index() == 2);
  }
  // zeros on both sides at the same index are fine
  const Categorical r({0.5, 0.5, 0.0});
  CHECK(divergence(p, r, DivergenceMode::backward()) == 0.0);
  CHECK_THROWS_AS(divergence(Categorical({1.0}), Categorical({0.5, 0.5}), DivergenceMode::forward()), InvalidArgument);
}

TEST_CASE("truncated divergence") {
  const Categorical q({0.4, 0.3, 0.2, 0.1});
  SUBCASE("k equal to the support size is the full divergence, bit for bit") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 50; ++t) {
      const Categorical p(oracle::random_simplex(rng, 6, 1e-3));
      const Categorical r(oracle::random_simplex(rng, 6, 1e-3));
      for (const auto& m : kModes) {
        for (auto form : {TruncatedForm::Relaxed, TruncatedForm::Plain}) {
          CHECK(truncated_divergence(p, r, {6, form}, m) == divergence(p, r, m));
        }
      }
    }
  }
  SUBCASE("identity on the truncated support") {
    for (const auto& m : kModes) CHECK(truncated_divergence(q, q, {2, TruncatedForm::Plain}, m) == 0.0);
    for (const auto& m : kModes) CHECK(truncated_divergence(q, q, {2, TruncatedForm::Relaxed}, m) == 0.0);
  }
  SUBCASE("uniform learner, k=2, Backward keeps indices {0,1}") {
    const Categorical p = Categorical::uniform(4);
    const double plain = 0.25 * std::log(0.25 / 0.4) + 0.25 * std::log(0.25 / 0.3);
    CHECK(truncated_divergence(p, q, {2, TruncatedForm::Plain}, DivergenceMode::backward()) ==
          doctest::Approx(plain).epsilon(1e-14));
    const double relaxed = plain + (0.4 - 0.25) + (0.3 - 0.25);
    CHECK(truncated_divergence(p, q, {2, TruncatedForm::Relaxed}, DivergenceMode::backward()) ==
          doctest::Approx(relaxed).epsilon(1e-14));
  }
  SUBCASE("random instances match the definition over the learner's top-k") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 3 + t % 10;
      const auto pv = oracle::random_simplex(rng, n, 1e-3);
      const auto qv = oracle::random_simplex(rng, n, 1e-3);
      const std::size_t k = 1 + t % (n - 1);
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return pv[a] > pv[b]; });
      idx.resize(k);
      for (const auto& m : kModes) {
        for (auto form : {TruncatedForm::Relaxed, TruncatedForm::Plain}) {
          const double got = truncated_divergence(Categorical(pv), Categorical(qv), {k, form}, m);
          CHECK(std::abs(got - truncated_oracle(pv, qv, idx, m, form)) < 1e-13);
        }
      }
    }
  }
  SUBCASE("bad k") {
    CHECK_THROWS_AS(truncated_divergence(q, q, {0}, DivergenceMode::forward()), InvalidArgument);
    CHECK_THROWS_AS(truncated_divergence(q, q, {5}, DivergenceMode::forward()), InvalidArgument);
  }
}

TEST_CASE("grad_wrt_p follows the closed forms") {
  const Categorical p({0.2, 0.8});
  const Categorical q({0.4, 0.6});
  const auto gf = grad_wrt_p(p, q, DivergenceMode::forward());
  const auto gb = grad_wrt_p(p, q, DivergenceMode::backward());
  CHECK(gf[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(gb[0] == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(gf[1] == doctest::Approx(1.0 - 0.6 / 0.8).epsilon(1e-15));
  CHECK(gb[1] == doctest::Approx(std::log(0.8 / 0.6)).epsilon(1e-15));

  for (const auto& m : kModes) {
    for (double g : grad_wrt_p(q, q, m)) CHECK(g == 0.0);
  }
  CHECK_THROWS_AS(grad_wrt_p(Categorical({1.0, 0.0}), q, DivergenceMode::forward()), ZeroProbability);

  std::mt19937_64 rng(6);
  for (int t = 0; t < 1000; ++t) {
    const auto pv = oracle::random_simplex(rng, 2 + t % 12, 1e-4);
    const auto qv = oracle::random_simplex(rng, pv.size(), 1e-4);
    const auto f = grad_wrt_p(Categorical(pv), Categorical(qv), DivergenceMode::forward());
    const auto b = grad_wrt_p(Categorical(pv), Categorical(qv), DivergenceMode::backward());
    const auto j = grad_wrt_p(Categorical(pv), Categorical(qv), DivergenceMode::jsd(0.3));
    for (std::size_t i = 0; i < pv.size(); ++i) {
      CHECK(std::abs(f[i] - (1.0 - qv[i] / pv[i])) <= 1e-12 * std::max(1.0, qv[i] / pv[i]));
      CHECK(std::abs(b[i] - std::log(pv[i] / qv[i])) <= 1e-12 * std::max(1.0, std::abs(std::log(pv[i] / qv[i]))));
      CHECK(std::abs(j[i] - (0.7 * f[i] + 0.3 * b[i])) < 1e-12 * std::max(1.0, std::abs(f[i])));
      if (qv[i] != pv[i]) CHECK((f[i] > 0) == (b[i] > 0));
    }
  }
}

TEST_CASE("grad_wrt_logits matches central differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0, 1.5);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + t % 12;
    std::vector<double> z(n);
    for (auto& v : z) v = g(rng);
    const auto qv = oracle::random_simplex(rng, n, 1e-3);
    const Categorical q(qv);
    const auto& mode = kModes[t % 4];
    std::optional<TruncationSpec> trunc;
    if (t % 3 == 1) trunc = TruncationSpec{1 + t % n, TruncatedForm::Relaxed};
    if (t % 3 == 2) trunc = TruncationSpec{1 + t % n, TruncatedForm::Plain};

    // Hold the top-k set at the evaluation point, as the analytic gradient does.
    const auto p0 = oracle::softmax(z);
    std::vector<std::size_t> keep(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = i;
    std::stable_sort(keep.begin(), keep.end(), [&](auto a, auto b) { return p0[a] > p0[b]; });
    if (trunc) keep.resize(trunc->k);
    const auto form = trunc ? trunc->form : TruncatedForm::Plain;
    auto f = [&](const std::vector<double>& x) {
      return truncated_oracle(oracle::softmax(x), qv, keep, mode, form);
    };
    const auto fd = oracle::central_diff(f, z);
    const auto an = grad_wrt_logits(Logits(z), q, mode, trunc);
    worst = std::max(worst, oracle::rel_error(an, fd));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("grad_wrt_logits special cases") {
  const Categorical q({0.4, 0.3, 0.2, 0.1});
  const Logits z({std::log(0.4), std::log(0.3), std::log(0.2), std::log(0.1)});
  for (const auto& m : kModes) {
    for (double v : grad_wrt_logits(z, q, m)) CHECK(std::abs(v) < 1e-15);
  }
  const Logits w({0.3, -1.2, 0.8, 0.1});
  for (const auto& m : kModes) {
    CHECK(grad_wrt_logits(w, q, m, TruncationSpec{4}) == grad_wrt_logits(w, q, m));
  }
  CHECK_THROWS_AS(grad_wrt_logits(w, Categorical({0.5, 0.5, 0.0, 0.0}), DivergenceMode::backward()), ZeroProbability);
}
