#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "ktlab/seq/model.hpp"

namespace ktlab::train {

struct AdamConfig {
  double beta0 = 0.9;   // first-moment decay
  double beta1 = 0.98;  // second-moment decay
  double epsilon = 1e-8;

  void validate() const;
};

/// Adam with bias correction over the flattened parameter vector.
class Adam {
 public:
  Adam(AdamConfig cfg, double learning_rate, std::size_t num_parameters);

  void step(seq::ModelParams& params, const seq::ModelParams& grads);
  std::size_t steps() const noexcept { return t_; }

  nlohmann::json state_to_json() const;
  void load_state(const nlohmann::json& j);

 private:
  AdamConfig cfg_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace ktlab::train
