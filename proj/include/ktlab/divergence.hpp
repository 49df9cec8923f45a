#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ktlab/categorical.hpp"

namespace ktlab {

/// Which KL order to minimize between a learner p and a teacher q.
///
///   Forward  D(q || p)   expectation under the teacher (knowledge distillation)
///   Backward D(p || q)   expectation under the learner (knowledge acquisition)
///   Jsd(w)   w * Backward + (1 - w) * Forward
class DivergenceMode {
 public:
  enum class Kind { Forward, Backward, Jsd };

  static DivergenceMode forward() { return DivergenceMode(Kind::Forward, 0.0); }
  static DivergenceMode backward() { return DivergenceMode(Kind::Backward, 1.0); }
  static DivergenceMode jsd(double backward_weight = 0.5);

  Kind kind() const noexcept { return kind_; }
  /// Weight on the Backward term; Forward gets the complement.
  double backward_weight() const noexcept { return weight_; }
  double forward_weight() const noexcept { return 1.0 - weight_; }

  /// "forward", "backward", "jsd" or "jsd:<w>" for non-default weights.
  std::string name() const;
  static DivergenceMode parse(const std::string& text);

  friend bool operator==(const DivergenceMode&, const DivergenceMode&) = default;

 private:
  DivergenceMode(Kind kind, double weight) : kind_(kind), weight_(weight) {}
  Kind kind_;
  double weight_;
};

/// How the terms outside the learner's top-k are dropped.
enum class TruncatedForm {
  /// Each kept term is completed with its Lagrange term (p - q for Forward, q - p for
  /// Backward). Kept terms are nonnegative and their p-derivatives are 1 - q/p and log(p/q).
  Relaxed,
  /// The bare sum of the kept KL terms.
  Plain,
};

/// Restrict a divergence to the k indices of highest learner probability.
/// Ties are broken toward the lowest index. No renormalization of the kept mass.
struct TruncationSpec {
  std::size_t k = 1;
  TruncatedForm form = TruncatedForm::Relaxed;
};

double divergence(const Categorical& learner, const Categorical& teacher, DivergenceMode mode);

double truncated_divergence(const Categorical& learner, const Categorical& teacher,
                            const TruncationSpec& trunc, DivergenceMode mode);

/// Per-index force on p: 1 - q/p (Forward), log(p/q) (Backward), weighted sum for Jsd.
/// Both distributions must be strictly positive.
std::vector<double> grad_wrt_p(const Categorical& learner, const Categorical& teacher,
                               DivergenceMode mode);

/// Exact gradient of the (optionally truncated) divergence of softmax(logits) from the
/// teacher, with respect to the logits. The top-k set is taken at the current point and
/// held fixed during differentiation.
std::vector<double> grad_wrt_logits(const Logits& logits, const Categorical& teacher,
                                    DivergenceMode mode,
                                    const std::optional<TruncationSpec>& trunc = std::nullopt);

}  // namespace ktlab
