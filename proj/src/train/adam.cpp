#include "ktlab/train/adam.hpp"

#include <cmath>

#include "ktlab/error.hpp"

namespace ktlab::train {

void AdamConfig::validate() const {
  if (!(beta0 >= 0.0 && beta0 < 1.0) || !(beta1 >= 0.0 && beta1 < 1.0)) {
    throw InvalidArgument("adam: betas must lie in [0,1)");
  }
  if (!(epsilon > 0.0)) throw InvalidArgument("adam: epsilon must be > 0");
}

Adam::Adam(AdamConfig cfg, double learning_rate, std::size_t num_parameters)
    : cfg_(cfg), lr_(learning_rate), m_(num_parameters, 0.0), v_(num_parameters, 0.0) {
  cfg_.validate();
  if (!(learning_rate > 0.0)) throw InvalidArgument("adam: learning rate must be > 0");
}

void Adam::step(seq::ModelParams& params, const seq::ModelParams& grads) {
  const auto g = grads.flatten();
  auto w = params.flatten();
  if (g.size() != m_.size() || w.size() != m_.size()) {
    throw InvalidArgument("adam: parameter count changed");
  }
  ++t_;
  const double c0 = 1.0 - std::pow(cfg_.beta0, static_cast<double>(t_));
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  for (std::size_t i = 0; i < w.size(); ++i) {
    m_[i] = cfg_.beta0 * m_[i] + (1.0 - cfg_.beta0) * g[i];
    v_[i] = cfg_.beta1 * v_[i] + (1.0 - cfg_.beta1) * g[i] * g[i];
    w[i] -= lr_ * (m_[i] / c0) / (std::sqrt(v_[i] / c1) + cfg_.epsilon);
  }
  params.assign_flat(w);
}

nlohmann::json Adam::state_to_json() const {
  return {{"t", t_}, {"m", m_}, {"v", v_}};
}

void Adam::load_state(const nlohmann::json& j) {
  auto m = j.at("m").get<std::vector<double>>();
  auto v = j.at("v").get<std::vector<double>>();
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw InvalidArgument("adam: saved state has wrong size");
  }
  t_ = j.at("t").get<std::size_t>();
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace ktlab::train
