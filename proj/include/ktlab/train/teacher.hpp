#pragma once

#include <string>
#include <vector>

#include "ktlab/categorical.hpp"
#include "ktlab/seq/corpus.hpp"
#include "ktlab/seq/model.hpp"

namespace ktlab::train {

/// A frozen teacher: q(y_t | y_<t^ref, x) at every target position.
class TeacherEvaluator {
 public:
  virtual ~TeacherEvaluator() = default;
  virtual std::vector<Categorical> position_dists(const seq::SentencePair& pair) const = 0;
  virtual int vocab_size() const = 0;
  virtual std::string describe() const = 0;
};

/// The generative process itself, mixed with a uniform floor:
/// q = (1 - smoothing) q_oracle + smoothing / V. The floor keeps Backward KL finite
/// against a learner softmax, which is positive everywhere.
class OracleTeacherEvaluator final : public TeacherEvaluator {
 public:
  OracleTeacherEvaluator(seq::GenSpec spec, double smoothing);

  std::vector<Categorical> position_dists(const seq::SentencePair& pair) const override;
  int vocab_size() const override { return oracle_.vocab_size(); }
  std::string describe() const override;
  const seq::OracleTeacher& oracle() const noexcept { return oracle_; }

 private:
  seq::OracleTeacher oracle_;
  double smoothing_;
};

/// A trained model used as teacher. Holds its own copy of the parameters.
class ModelTeacherEvaluator final : public TeacherEvaluator {
 public:
  explicit ModelTeacherEvaluator(seq::ModelParams params);

  std::vector<Categorical> position_dists(const seq::SentencePair& pair) const override;
  int vocab_size() const override { return params_.dims().target_vocab; }
  std::string describe() const override;
  const seq::ModelParams& params() const noexcept { return params_; }

 private:
  seq::ModelParams params_;
};

}  // namespace ktlab::train
