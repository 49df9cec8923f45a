#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "ktlab/error.hpp"
#include "ktlab/gradient_analysis.hpp"
#include "oracles.hpp"

using namespace ktlab;
using namespace ktlab::analysis;

TEST_CASE("classify_regions on a two-point example") {
  const auto r = classify_regions(Categorical({0.2, 0.8}), Categorical({0.4, 0.6}));
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].region == Region::I);
  CHECK(r.records[0].g_forward < 0);
  CHECK(r.records[0].g_backward < 0);
  CHECK(r.records[0].g_forward == doctest::Approx(-1.0));
  CHECK(r.records[0].g_backward == doctest::Approx(std::log(0.5)));
  CHECK(r.records[0].dominance == Dominance::Forward);
  CHECK(r.records[1].region == Region::II);
  CHECK(r.records[1].g_forward > 0);
  CHECK(r.records[1].g_backward > 0);
  CHECK(r.records[1].dominance == Dominance::Backward);
}

TEST_CASE("identical distributions are all boundary with zero gradients") {
  const Categorical p({0.1, 0.2, 0.3, 0.4});
  for (const auto& rec : classify_regions(p, p).records) {
    CHECK(rec.region == Region::Boundary);
    CHECK(rec.g_forward == 0.0);
    CHECK(rec.g_backward == 0.0);
    CHECK(rec.dominance == Dominance::Equal);
  }
  CHECK_THROWS_AS(classify_regions(Categorical({1.0, 0.0}), p.probs().size() == 2 ? p : Categorical({0.5, 0.5})),
                  InvalidArgument);
}

TEST_CASE("report serialization") {
  const auto r = classify_regions(Categorical({0.2, 0.8}), Categorical({0.4, 0.6}));
  const auto csv = r.to_csv();
  CHECK(csv.rfind("index,p,q,region,g_forward,g_backward,dominance\n", 0) == 0);
  CHECK(csv.find("\n0,0.2,0.4,I,") != std::string::npos);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("records").size() == 2);
  CHECK(j.at("records")[1].at("region") == "II");
}

TEST_CASE("z - ln z") {
  CHECK(z_minus_log_z(1.0) == 1.0);
  CHECK(z_minus_log_z(0.5) == doctest::Approx(0.5 - std::log(0.5)).epsilon(1e-15));
  CHECK(z_minus_log_z(0.5) == doctest::Approx(1.1931).epsilon(1e-4));
  CHECK(z_minus_log_z(2.0) == doctest::Approx(1.3069).epsilon(1e-4));
  CHECK_THROWS_AS(z_minus_log_z(0.0), InvalidArgument);
  CHECK_THROWS_AS(z_minus_log_z(-1.0), InvalidArgument);
  for (int i = -600; i <= 600; ++i) {
    const double z = std::pow(10.0, i / 100.0);
    if (i == 0) {
      CHECK(std::abs(z_minus_log_z(z) - 1.0) < 1e-12);
    } else {
      CHECK(z_minus_log_z(z) > 1.0);
    }
  }
}

TEST_CASE("dominance margin equals |G_forward| - |G_backward|") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1e-4, 1.0);
  for (int t = 0; t < 20000; ++t) {
    const double p = u(rng), q = u(rng);
    const double direct = std::abs(1.0 - q / p) - std::abs(std::log(p / q));
    const double m = dominance_margin(p, q);
    CHECK(std::abs(m - direct) < 1e-12 * std::max(1.0, q / p));
    if (q > p) CHECK(m > 0.0);
    if (q < p) CHECK(m < 0.0);
  }
  CHECK(dominance_margin(0.3, 0.3) == 0.0);
  // near-equal values are where cancellation would bite; the sign must still be right
  CHECK(dominance_margin(0.5, 0.5 * (1 + 1e-9)) > 0.0);
  CHECK(dominance_margin(0.5 * (1 + 1e-9), 0.5) < 0.0);
}

TEST_CASE("property suite on random positive pairs") {
  std::mt19937_64 rng(12);
  std::size_t checked = 0;
  for (int t = 0; t < 20000; ++t) {
    const auto pv = oracle::random_simplex(rng, 2 + t % 16, 1e-6);
    const auto qv = oracle::random_simplex(rng, pv.size(), 1e-6);
    for (const auto& r : classify_regions(Categorical(pv), Categorical(qv)).records) {
      if (r.region == Region::Boundary) continue;
      ++checked;
      const bool in_i = qv[r.index] > pv[r.index];
      CHECK((r.region == Region::I) == in_i);
      if (in_i) {
        CHECK((r.g_forward < 0 && r.g_backward < 0));
        CHECK(r.dominance == Dominance::Forward);
      } else {
        CHECK((r.g_forward > 0 && r.g_backward > 0));
        CHECK(r.dominance == Dominance::Backward);
      }
    }
  }
  CHECK(checked > 100000);
}

TEST_CASE("simplex projection") {
  const std::vector<double> a{0.2, 0.3, 0.5};
  CHECK(project_to_simplex(a) == a);
  const auto b = project_to_simplex(std::vector<double>{2.0, 0.0, -1.0});
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK(b[1] == 0.0);
  CHECK(b[2] == 0.0);
  // brute force: the projection minimizes distance, so random simplex points are no closer
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(5);
    for (auto& x : v) x = g(rng);
    const auto p = project_to_simplex(v);
    double s = 0, d = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(p[i] >= 0.0);
      s += p[i];
      d += (p[i] - v[i]) * (p[i] - v[i]);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 0; k < 200; ++k) {
      const auto r = oracle::random_simplex(rng, 5);
      double dr = 0;
      for (std::size_t i = 0; i < 5; ++i) dr += (r[i] - v[i]) * (r[i] - v[i]);
      CHECK(dr >= d - 1e-12);
    }
  }
}

TEST_CASE("lagrangian stationarity recovers +1 and -1") {
  const Categorical q({0.4, 0.3, 0.2, 0.1});
  const auto f = lagrangian_stationarity(DivergenceMode::forward(), q);
  const auto b = lagrangian_stationarity(DivergenceMode::backward(), q);
  CHECK(std::abs(f.multiplier - 1.0) < 1e-6);
  CHECK(std::abs(b.multiplier + 1.0) < 1e-6);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(f.optimum[i] - q[i]) < 1e-8);
    CHECK(std::abs(b.optimum[i] - q[i]) < 1e-8);
  }
  const auto u = lagrangian_stationarity(DivergenceMode::backward(), Categorical::uniform(7));
  for (double v : u.optimum) CHECK(std::abs(v - 1.0 / 7) < 1e-8);
  CHECK_THROWS_AS(lagrangian_stationarity(DivergenceMode::jsd(), q), InvalidArgument);
  CHECK_THROWS_AS(lagrangian_stationarity(DivergenceMode::forward(), Categorical({1.0, 0.0})), InvalidArgument);
}

TEST_CASE("lagrangian stationarity reports its residual when out of budget") {
  StationarityOptions tight;
  tight.max_iterations = 2;
  try {
    (void)lagrangian_stationarity(DivergenceMode::forward(), Categorical({0.7, 0.2, 0.1}), tight);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 1e-10);
  }
}

TEST_CASE("soft-Q identity") {
  const std::vector<double> Q{1.0, -0.5, 2.0, 0.0};
  const auto pi = oracle::softmax(Q);
  CHECK(soft_q_identity_check(Q, Categorical(pi)) < 1e-12);
  const std::vector<double> flat{3.0, 3.0, 3.0};
  CHECK(soft_q_identity_check(flat, Categorical({0.2, 0.5, 0.3})) < 1e-12);

  // Both sides written out independently.
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-5, 5);
  double worst = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> q(8);
    for (auto& v : q) v = u(rng);
    const auto p = oracle::random_simplex(rng, 8, 1e-9);
    long double lhs = oracle::entropy(p), z = 0;
    for (int i = 0; i < 8; ++i) lhs += p[i] * q[i];
    for (double v : q) z += std::exp(static_cast<long double>(v));
    const double rhs = static_cast<double>(std::log(z)) - oracle::kl(p, oracle::softmax(q));
    CHECK(std::abs(static_cast<double>(lhs) - rhs) < 1e-10);
    worst = std::max(worst, soft_q_identity_check(q, Categorical(p)));
  }
  CHECK(worst < 1e-10);
  CHECK_THROWS_AS(soft_q_identity_check(flat, Categorical({0.5, 0.5})), InvalidArgument);
}

TEST_CASE("density grid reproduces the unimodal-vs-bimodal picture") {
  const auto g = discretize({});
  CHECK(g.x.size() == 1024);
  CHECK(g.x.front() == -6.0);
  CHECK(g.x.back() == 6.0);
  const auto r = classify_regions(g.learner, g.teacher);
  std::size_t ones = 0, twos = 0;
  for (const auto& rec : r.records) {
    if (rec.region == Region::I) {
      ++ones;
      CHECK(rec.dominance == Dominance::Forward);
    } else if (rec.region == Region::II) {
      ++twos;
      CHECK(rec.dominance == Dominance::Backward);
    }
  }
  CHECK(ones > 0);
  CHECK(twos > 0);
  // learner over-covers the centre (between the teacher's modes), under-covers the modes
  CHECK(r.records[512].region == Region::II);
  const auto mode_index = static_cast<std::size_t>((2.0 + 6.0) / 12.0 * 1023.0 + 0.5);
  CHECK(r.records[mode_index].region == Region::I);
  CHECK_THROWS_AS(discretize({1, -6, 6}), InvalidArgument);
}
