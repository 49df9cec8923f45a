#include "ktlab/gradient_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ktlab/error.hpp"
#include "ktlab/io.hpp"

namespace ktlab::analysis {

std::string to_string(Region r) {
  switch (r) {
    case Region::I:
      return "I";
    case Region::II:
      return "II";
    case Region::Boundary:
      return "boundary";
  }
  return "?";
}

std::string to_string(Dominance d) {
  switch (d) {
    case Dominance::Forward:
      return "forward";
    case Dominance::Backward:
      return "backward";
    case Dominance::Equal:
      return "equal";
  }
  return "?";
}

std::string GradientReport::to_csv() const {
  std::ostringstream out;
  out << "index,p,q,region,g_forward,g_backward,dominance\n";
  for (const auto& r : records) {
    out << r.index << ',' << format_double(r.p) << ',' << format_double(r.q) << ','
        << to_string(r.region) << ',' << format_double(r.g_forward) << ','
        << format_double(r.g_backward) << ',' << to_string(r.dominance) << '\n';
  }
  return out.str();
}

std::string GradientReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    arr.push_back({{"index", r.index},
                   {"p", r.p},
                   {"q", r.q},
                   {"region", to_string(r.region)},
                   {"g_forward", r.g_forward},
                   {"g_backward", r.g_backward},
                   {"dominance", to_string(r.dominance)}});
  }
  return nlohmann::json{{"records", arr}}.dump(2) + "\n";
}

GradientReport classify_regions(const Categorical& learner, const Categorical& teacher) {
  const auto g_f = grad_wrt_p(learner, teacher, DivergenceMode::forward());
  const auto g_b = grad_wrt_p(learner, teacher, DivergenceMode::backward());
  GradientReport report;
  report.records.reserve(learner.size());
  for (std::size_t i = 0; i < learner.size(); ++i) {
    GradientRecord r;
    r.index = i;
    r.p = learner[i];
    r.q = teacher[i];
    r.g_forward = g_f[i];
    r.g_backward = g_b[i];
    if (std::abs(r.p - r.q) < kBoundaryTolerance) {
      r.region = Region::Boundary;
    } else {
      r.region = r.q > r.p ? Region::I : Region::II;
    }
    const double mf = std::abs(r.g_forward);
    const double mb = std::abs(r.g_backward);
    if (r.region == Region::Boundary || mf == mb) {
      r.dominance = Dominance::Equal;
    } else {
      r.dominance = mf > mb ? Dominance::Forward : Dominance::Backward;
    }
    report.records.push_back(r);
  }
  return report;
}

double z_minus_log_z(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw InvalidArgument("z - log z needs finite z > 0, got " + std::to_string(z));
  }
  return z - std::log(z);
}

double dominance_margin(double p, double q) {
  if (!(p > 0.0) || !(q > 0.0)) throw InvalidArgument("dominance margin needs p, q > 0");
  // u = z - 1 with z = q/p; z - ln z - 1 = u - log1p(u), evaluated by series near 0.
  const double u = (q - p) / p;
  double excess = 0.0;
  if (std::abs(u) < 1e-3) {
    double term = u * u;
    double sign = 1.0;
    for (int n = 2; n < 12; ++n) {
      excess += sign * term / n;
      term *= u;
      sign = -sign;
    }
  } else {
    excess = u - std::log1p(u);
  }
  return q > p ? excess : -excess;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("simplex projection of empty vector");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

namespace {

// Gradient of the constrained objective shifted by a constant (which the simplex
// projection ignores): exactly the Forward / Backward force on p.
std::vector<double> shifted_gradient(DivergenceMode order, std::span<const double> p,
                                     const Categorical& q) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (order.kind() == DivergenceMode::Kind::Forward) {
      g[i] = (p[i] - q[i]) / p[i];
    } else {
      g[i] = std::log1p((p[i] - q[i]) / q[i]);
    }
  }
  return g;
}

double tangent_norm(std::span<const double> g) {
  const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
  double s = 0.0;
  for (double v : g) s += (v - mean) * (v - mean);
  return std::sqrt(s);
}

}  // namespace

StationarityResult lagrangian_stationarity(DivergenceMode order, const Categorical& teacher,
                                           const StationarityOptions& opts) {
  if (order.kind() == DivergenceMode::Kind::Jsd) {
    throw InvalidArgument("lagrangian stationarity is defined for forward or backward only");
  }
  if (!teacher.strictly_positive()) {
    for (std::size_t i = 0; i < teacher.size(); ++i) {
      if (teacher[i] <= 0.0) throw ZeroProbability("stationarity needs a positive teacher", i);
    }
  }
  const std::size_t n = teacher.size();
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  std::vector<double> g = shifted_gradient(order, p, teacher);
  double step = opts.initial_step;
  double residual = tangent_norm(g);
  std::size_t it = 0;

  // Projected gradient with a backtracking Lipschitz test on gradients, which stays
  // reliable once objective differences fall below double resolution.
  for (; it < opts.max_iterations && residual >= opts.tolerance; ++it) {
    std::vector<double> moved(n);
    for (std::size_t i = 0; i < n; ++i) moved[i] = p[i] - step * g[i];
    auto candidate = project_to_simplex(moved);
    const bool interior =
        std::all_of(candidate.begin(), candidate.end(), [](double v) { return v > 0.0; });
    if (!interior) {
      step *= 0.5;
      continue;
    }
    const auto g_new = shifted_gradient(order, candidate, teacher);
    double curvature = 0.0;
    double dist2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = candidate[i] - p[i];
      curvature += (g_new[i] - g[i]) * d;
      dist2 += d * d;
    }
    if (curvature > dist2 / step) {
      step *= 0.5;
      continue;
    }
    p = std::move(candidate);
    g = g_new;
    residual = tangent_norm(g);
    step = std::min(step * 1.5, opts.initial_step);
  }
  if (residual >= opts.tolerance) {
    throw ConvergenceError("lagrangian stationarity did not converge", residual);
  }

  double multiplier = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (order.kind() == DivergenceMode::Kind::Forward) {
      multiplier += teacher[i] / p[i];
    } else {
      multiplier += -1.0 - std::log1p((p[i] - teacher[i]) / teacher[i]);
    }
  }
  multiplier /= static_cast<double>(n);
  return {multiplier, std::move(p), residual, it};
}

double soft_q_identity_check(std::span<const double> q_values, const Categorical& policy) {
  if (q_values.size() != policy.size()) {
    throw InvalidArgument("soft-Q identity: Q has " + std::to_string(q_values.size()) +
                          " actions, policy has " + std::to_string(policy.size()));
  }
  const Logits logits(std::vector<double>(q_values.begin(), q_values.end()));
  double expected_q = 0.0;
  for (std::size_t a = 0; a < policy.size(); ++a) expected_q += policy[a] * q_values[a];
  const double lhs = expected_q + entropy(policy);
  const double rhs = log_sum_exp(q_values) -
                     divergence(policy, softmax(logits), DivergenceMode::backward());
  return std::abs(lhs - rhs);
}

namespace {

double mixture_density(const GaussianMixture& m, double x) {
  double d = 0.0;
  for (std::size_t c = 0; c < m.weights.size(); ++c) {
    const double z = (x - m.means[c]) / m.stddevs[c];
    d += m.weights[c] * std::exp(-0.5 * z * z) / (m.stddevs[c] * std::sqrt(2.0 * std::numbers::pi));
  }
  return d;
}

Categorical discretize_one(const GaussianMixture& m, const std::vector<double>& x,
                           const char* who) {
  if (m.weights.empty() || m.weights.size() != m.means.size() ||
      m.weights.size() != m.stddevs.size()) {
    throw InvalidArgument(std::string(who) + " mixture: component arrays differ in length");
  }
  for (std::size_t c = 0; c < m.weights.size(); ++c) {
    if (!(m.weights[c] > 0.0) || !(m.stddevs[c] > 0.0)) {
      throw InvalidArgument(std::string(who) + " mixture: weights and stddevs must be > 0");
    }
  }
  std::vector<double> d(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d[i] = mixture_density(m, x[i]);
    total += d[i];
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] /= total;
    if (!(d[i] > 0.0)) {
      throw ZeroProbability(std::string(who) + " density underflows on the grid", i);
    }
  }
  return Categorical(std::move(d));
}

}  // namespace

DensityGrid discretize(const DensityGridConfig& cfg) {
  if (cfg.points < 2 || !(cfg.hi > cfg.lo)) {
    throw InvalidArgument("density grid needs >= 2 points and hi > lo");
  }
  std::vector<double> x(cfg.points);
  const double h = (cfg.hi - cfg.lo) / static_cast<double>(cfg.points - 1);
  for (std::size_t i = 0; i < cfg.points; ++i) x[i] = cfg.lo + h * static_cast<double>(i);
  auto learner = discretize_one(cfg.learner, x, "learner");
  auto teacher = discretize_one(cfg.teacher, x, "teacher");
  return {std::move(x), std::move(learner), std::move(teacher)};
}

}  // namespace ktlab::analysis
