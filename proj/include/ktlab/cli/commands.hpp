#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktlab/cli/config.hpp"
#include "ktlab/metrics/sweep.hpp"
#include "ktlab/toy.hpp"
#include "ktlab/train/trainer.hpp"

namespace ktlab::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitCheckFailed = 4,
  kExitInterrupted = 5,
};

/// A run stopped on request before finishing; checkpoints are on disk.
class Interrupted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  bool dry_run = false;
  bool resume = false;
  /// Stop every training phase after this epoch (simulates an interruption).
  int halt_after_epoch = -1;
  bool check_lagrangian = false;
  std::optional<std::size_t> soft_q;
};

/// Configured worker count, capped by KTLAB_WORKERS when set. Never 0.
unsigned resolve_workers(unsigned configured);

/// File names a mode is stored under ("jsd:0.3" becomes "jsd_0.3").
std::string mode_file_stem(const DivergenceMode& mode);

// ---- toy ----

struct ToySeedRow {
  std::uint64_t seed = 0;
  std::vector<double> forward_error;   // |p_i - q_i| at the end
  std::vector<double> backward_error;
  double forward_loss = 0.0;   // final truncated loss
  double backward_loss = 0.0;
  bool tail_win = false;  // Backward closer on every index outside the top-k of the teacher
  bool loss_win = false;  // Backward's final truncated loss <= Forward's
};

struct ToyOutcome {
  toy::OrderComparison base;
  std::vector<ToySeedRow> seeds;
  double tail_win_rate = 0.0;
  double loss_win_rate = 0.0;
};

ToyOutcome run_toy_experiment(const ExperimentConfig& cfg);

// ---- transfer ----

struct ModeOutcome {
  std::string mode;
  train::MetricsLog log;
  double final_bleu = 0.0;
  double initial_entropy = 0.0;
  double final_entropy = 0.0;
  std::size_t novel_total = 0;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double learner_bleu = 0.0;  // after pre-training
  std::vector<ModeOutcome> modes;
  std::vector<metrics::SweepRow> sweep;
};

struct TransferOutcome {
  std::vector<SeedOutcome> seeds;
  /// Mean over seeds of final validation BLEU per mode, in configured mode order.
  std::vector<double> mean_bleu;
  double mean_learner_bleu = 0.0;
};

/// Full pipeline; writes everything under cfg.output_dir / "transfer".
TransferOutcome run_transfer_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

// ---- commands ----

int cmd_toy(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out);
int cmd_transfer(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out);
int cmd_analyze(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out);

}  // namespace ktlab::cli
