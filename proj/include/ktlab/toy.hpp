#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ktlab/categorical.hpp"
#include "ktlab/divergence.hpp"

namespace ktlab::toy {

enum class InitKind { Uniform, RandomLogits };

/// A single softmax layer trained against a fixed teacher under top-k truncated KL.
struct ToyConfig {
  Categorical teacher = Categorical({0.4, 0.3, 0.2, 0.1});
  std::size_t k = 2;
  DivergenceMode mode = DivergenceMode::forward();
  TruncatedForm form = TruncatedForm::Relaxed;
  double learning_rate = 0.5;
  int epochs = 300;
  std::uint64_t seed = 0;
  InitKind init = InitKind::Uniform;
  double init_scale = 1.0;  // stddev of the Gaussian logits for RandomLogits

  void validate() const;
};

struct ToyRecord {
  int epoch = 0;
  Categorical p = Categorical::uniform(1);
  double truncated_loss = 0.0;
  double full_loss = 0.0;
  std::vector<std::size_t> topk;  // learner top-k, descending probability
};

/// One record per epoch, starting with the initial state (epochs + 1 records).
struct ToyTrace {
  std::vector<ToyRecord> records;

  const ToyRecord& final() const { return records.back(); }
  /// Header: epoch,p0,...,p{n-1},truncated_loss,full_loss,topk
  std::string to_csv() const;
};

/// Initial logits for a config: zeros, or seeded Gaussian draws.
std::vector<double> initial_logits(const ToyConfig& cfg);

/// Full-batch gradient descent on the logits. Throws NumericalError naming the epoch
/// if a logit goes non-finite.
ToyTrace run_toy(const ToyConfig& cfg);

struct OrderSummary {
  std::string mode;
  /// Per index, first epoch with |p_i - q_i| <= band (nullopt if never).
  std::vector<std::optional<int>> first_within_band;
  /// Epochs at which the top-k set (as a set) differs from the previous epoch's.
  std::vector<int> topk_changes;
  std::vector<std::size_t> final_topk;
  std::vector<double> final_abs_error;  // |p_i - q_i| at the last epoch
  double final_truncated_loss = 0.0;
};

struct OrderComparison {
  ToyTrace forward;
  ToyTrace backward;
  OrderSummary forward_summary;
  OrderSummary backward_summary;

  std::string to_json() const;
};

inline constexpr double kBand = 0.02;

OrderSummary summarize(const ToyTrace& trace, const Categorical& teacher, const std::string& mode,
                       double band = kBand);

/// Run Forward and Backward from the same initialization and summarize both.
OrderComparison compare_orders(const ToyConfig& base);

}  // namespace ktlab::toy
