#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ktlab/categorical.hpp"
#include "ktlab/divergence.hpp"

namespace ktlab::analysis {

/// Region I: the teacher rates the token higher than the learner (q > p).
/// Region II: the learner over-rates it (q < p).
enum class Region { I, II, Boundary };
/// Which order's gradient has the larger magnitude at an index.
enum class Dominance { Forward, Backward, Equal };

std::string to_string(Region r);
std::string to_string(Dominance d);

struct GradientRecord {
  std::size_t index = 0;
  double p = 0.0;
  double q = 0.0;
  Region region = Region::Boundary;
  double g_forward = 0.0;   // 1 - q/p
  double g_backward = 0.0;  // log p/q
  Dominance dominance = Dominance::Equal;
};

struct GradientReport {
  std::vector<GradientRecord> records;

  /// Header: index,p,q,region,g_forward,g_backward,dominance
  std::string to_csv() const;
  std::string to_json() const;
};

inline constexpr double kBoundaryTolerance = 1e-12;

GradientReport classify_regions(const Categorical& learner, const Categorical& teacher);

/// z - ln z, which is >= 1 with equality only at z = 1.
double z_minus_log_z(double z);

/// |G_forward| - |G_backward| at one index, evaluated from the closed form
/// z - ln z - 1 (region I) or 1 - (z - ln z) (region II) with z = q/p.
double dominance_margin(double p, double q);

struct StationarityResult {
  double multiplier = 0.0;        // recovered Lagrange multiplier
  std::vector<double> optimum;    // p* on the simplex
  double residual = 0.0;          // tangent-space gradient norm at p*
  std::size_t iterations = 0;
};

struct StationarityOptions {
  double initial_step = 0.1;
  double tolerance = 1e-10;
  std::size_t max_iterations = 1'000'000;
};

/// Minimize the Forward or Backward KL to `teacher` over the probability simplex by
/// projected gradient descent, then read the multiplier off the stationarity condition:
/// q/p* for Forward, -1 - log(p*/q) for Backward (averaged over indices).
StationarityResult lagrangian_stationarity(DivergenceMode order, const Categorical& teacher,
                                           const StationarityOptions& opts = {});

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

/// |(E_p[Q] + H[p]) - (logsumexp Q - D(p || softmax Q))|.
double soft_q_identity_check(std::span<const double> q_values, const Categorical& policy);

/// Discretized stand-in for the unimodal-learner / bimodal-teacher picture.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stddevs;
};

struct DensityGridConfig {
  std::size_t points = 1024;
  double lo = -6.0;
  double hi = 6.0;
  GaussianMixture learner{{1.0}, {0.0}, {1.5}};
  GaussianMixture teacher{{0.5, 0.5}, {-2.0, 2.0}, {0.7, 0.7}};
};

/// Grid coordinates and the discretized learner/teacher Categoricals.
struct DensityGrid {
  std::vector<double> x;
  Categorical learner;
  Categorical teacher;
};

DensityGrid discretize(const DensityGridConfig& cfg);

}  // namespace ktlab::analysis
