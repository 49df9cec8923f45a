#include "ktlab/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ktlab/error.hpp"

namespace ktlab {

Logits::Logits(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("logits: empty vector");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw InvalidArgument("logits: non-finite entry at index " + std::to_string(i));
    }
  }
}

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidArgument("categorical: empty support");
  double total = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double v = probs_[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InvalidArgument("categorical: entry " + std::to_string(i) + " = " +
                            std::to_string(v) + " outside [0,1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InvalidArgument("categorical: entries sum to " + std::to_string(total));
  }
}

Categorical Categorical::uniform(std::size_t n) {
  if (n == 0) throw InvalidArgument("categorical: empty support");
  return Categorical(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Categorical Categorical::one_hot(std::size_t n, std::size_t index) {
  if (index >= n) throw InvalidArgument("categorical: one-hot index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return Categorical(std::move(p));
}

bool Categorical::strictly_positive() const noexcept {
  return std::all_of(probs_.begin(), probs_.end(), [](double v) { return v > 0.0; });
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

Categorical softmax(const Logits& logits) {
  const auto z = logits.values();
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    s += p[i];
  }
  // Underflowed entries are lifted to the smallest normal so the output stays strictly positive.
  for (double& v : p) v = std::max(v / s, std::numeric_limits<double>::min());
  return Categorical(std::move(p));
}

double entropy(const Categorical& p) {
  double h = 0.0;
  for (double v : p.probs()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(h, 0.0);
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
  if (k == 0 || k > values.size()) {
    throw InvalidArgument("top-k: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(values.size()) + "]");
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

}  // namespace ktlab
