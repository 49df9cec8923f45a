#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ktlab {

/// Unconstrained scores feeding a softmax. Entries must be finite.
class Logits {
 public:
  explicit Logits(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

/// A finite probability distribution over token / action ids.
///
/// Entries are nonnegative and sum to one within 1e-9. Construction validates;
/// every Categorical in circulation satisfies the invariants.
class Categorical {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit Categorical(std::vector<double> probs);

  static Categorical uniform(std::size_t n);
  static Categorical one_hot(std::size_t n, std::size_t index);

  std::span<const double> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

  /// True when every entry is > 0.
  bool strictly_positive() const noexcept;

  friend bool operator==(const Categorical&, const Categorical&) = default;

 private:
  std::vector<double> probs_;
};

/// Numerically stable softmax; the output is strictly positive.
Categorical softmax(const Logits& logits);

/// log(sum(exp(x))) with the max subtracted first.
double log_sum_exp(std::span<const double> x);

/// Shannon entropy in nats with 0 log 0 = 0.
double entropy(const Categorical& p);

/// Indices of the k largest entries in descending order. Ties go to the lowest index.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

}  // namespace ktlab
