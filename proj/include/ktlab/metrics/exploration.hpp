#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ktlab/seq/vocab.hpp"
#include "ktlab/train/trainer.hpp"

namespace ktlab::metrics {

/// Top-k token sets per probe position, one per logged epoch.
struct TopKHistory {
  std::size_t k = 16;
  std::vector<int> epochs;                                   // strictly increasing
  std::vector<std::vector<std::vector<seq::TokenId>>> sets;  // [probe][epoch]

  /// Throws on ragged or non-increasing data, or a set that is not k distinct tokens.
  void validate() const;
};

TopKHistory history_from_log(const train::MetricsLog& log, std::size_t k);

/// Per epoch, the number of (probe, token) pairs in that epoch's top-k that appear in no
/// earlier epoch's top-k at the same probe. The first epoch counts 0.
std::vector<std::size_t> novel_topk_count(const TopKHistory& history);

/// One curve per mode label, all over the same epochs.
struct Curve {
  std::string mode;
  std::vector<int> epochs;
  std::vector<double> values;
};

/// "epoch,mode,novel_count"
std::string novel_count_csv(std::span<const Curve> curves);
/// "epoch,mode,entropy"
std::string entropy_csv(std::span<const Curve> curves);

Curve entropy_curve(const std::string& mode, const train::MetricsLog& log);
Curve novel_count_curve(const std::string& mode, const train::MetricsLog& log, std::size_t k);

}  // namespace ktlab::metrics
