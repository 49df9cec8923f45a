#include "ktlab/train/teacher.hpp"

#include "ktlab/error.hpp"

namespace ktlab::train {

OracleTeacherEvaluator::OracleTeacherEvaluator(seq::GenSpec spec, double smoothing)
    : oracle_(std::move(spec)), smoothing_(smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw InvalidArgument("oracle teacher: smoothing must lie in [0,1)");
  }
}

std::vector<Categorical> OracleTeacherEvaluator::position_dists(const seq::SentencePair& pair) const {
  auto exact = oracle_.position_dists(pair.source, pair.target);
  if (smoothing_ == 0.0) return exact;
  const double floor = smoothing_ / static_cast<double>(vocab_size());
  std::vector<Categorical> out;
  out.reserve(exact.size());
  for (const auto& q : exact) {
    std::vector<double> s(q.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = (1.0 - smoothing_) * q[i] + floor;
    out.emplace_back(std::move(s));
  }
  return out;
}

std::string OracleTeacherEvaluator::describe() const {
  return "oracle(smoothing=" + std::to_string(smoothing_) + ")";
}

ModelTeacherEvaluator::ModelTeacherEvaluator(seq::ModelParams params) : params_(std::move(params)) {
  params_.validate();
}

std::vector<Categorical> ModelTeacherEvaluator::position_dists(const seq::SentencePair& pair) const {
  return seq::position_dists(params_, pair.source, pair.target);
}

std::string ModelTeacherEvaluator::describe() const {
  return "model(hidden=" + std::to_string(params_.dims().hidden) + ")";
}

}  // namespace ktlab::train
