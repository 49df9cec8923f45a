#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ktlab/divergence.hpp"
#include "ktlab/seq/beam.hpp"
#include "ktlab/seq/corpus.hpp"
#include "ktlab/seq/model.hpp"
#include "ktlab/train/adam.hpp"
#include "ktlab/train/teacher.hpp"

namespace ktlab::train {

/// Objective: (1 - lambda) * NLL + lambda * sum_t D(p_t, q_t), each averaged over positions.
struct TrainConfig {
  double lambda = 0.5;
  DivergenceMode mode = DivergenceMode::backward();
  std::optional<TruncationSpec> topk;
  double learning_rate = 1e-4;
  AdamConfig adam;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  int pretrain_epochs = 10;

  void validate() const;
};

/// A (training pair, target position) whose top-k set is tracked across epochs.
struct ProbePosition {
  std::size_t pair = 0;
  std::size_t position = 0;

  friend bool operator==(const ProbePosition&, const ProbePosition&) = default;
};

/// Up to `count` distinct positions drawn uniformly from `pairs`, seeded.
std::vector<ProbePosition> sample_probes(std::span<const seq::SentencePair> pairs,
                                         std::size_t count, std::uint64_t seed);

/// What gets measured at every epoch boundary.
struct EvalConfig {
  seq::BeamConfig beam;
  std::vector<ProbePosition> probes;  // into corpus.train
  std::size_t probe_k = 16;
  /// Decode the validation split and score BLEU. Off saves time in unit tests.
  bool decode_validation = true;
};

struct EpochMetrics {
  int epoch = 0;  // 0 is the state before any update
  double nll_loss = 0.0;
  double transfer_loss = 0.0;
  double total_loss = 0.0;
  /// Mean entropy of the learner's token distribution over validation positions.
  double mean_position_entropy = 0.0;
  double validation_score = 0.0;  // BLEU
  /// Mean per-position divergence from the teacher on validation; absent without a teacher.
  std::optional<double> validation_divergence;
  std::vector<std::vector<seq::TokenId>> topk_sets;  // one per probe

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct MetricsLog {
  std::vector<EpochMetrics> epochs;

  /// Throws unless epochs strictly increase and every value is finite.
  void validate() const;
  std::string to_jsonl() const;
  /// Scalar columns only; top-k sets live in the JSON lines.
  std::string to_csv() const;
  static MetricsLog from_jsonl(const std::string& text);

  friend bool operator==(const MetricsLog&, const MetricsLog&) = default;
};

nlohmann::json to_json(const EpochMetrics& m);
EpochMetrics epoch_metrics_from_json(const nlohmann::json& j);

struct BatchLoss {
  double total = 0.0;
  double nll = 0.0;
  double transfer = 0.0;
  std::size_t positions = 0;
};

/// Teacher distributions for every position of every pair, computed once per run.
using TeacherCache = std::vector<std::vector<Categorical>>;
TeacherCache cache_teacher(const TeacherEvaluator& teacher, std::span<const seq::SentencePair> pairs);

/// Loss over a batch, averaged over its positions. When `grads` is given, the gradient of
/// `total` is accumulated into it. `teacher` may be null, in which case the transfer term
/// is zero. teacher[i] belongs to batch[i].
BatchLoss batch_loss(const seq::ModelParams& learner, std::span<const seq::SentencePair> batch,
                     const std::vector<const std::vector<Categorical>*>& teacher, double lambda,
                     DivergenceMode mode, const std::optional<TruncationSpec>& topk,
                     seq::ModelParams* grads);

struct TransferLoss {
  double loss = 0.0;  // sum over positions
  seq::ModelParams grads;
};

/// sum_t D(p_t, q_t) for one pair, both models on the reference prefix, and its gradient
/// with respect to the learner.
TransferLoss transfer_loss(const seq::ModelParams& learner, const TeacherEvaluator& teacher,
                           const seq::SentencePair& pair, DivergenceMode mode,
                           const std::optional<TruncationSpec>& topk = std::nullopt);

/// Everything needed to continue a run after the last completed epoch.
struct TrainerState {
  seq::ModelParams learner;
  nlohmann::json optimizer;
  int epoch = 0;
  MetricsLog log;

  nlohmann::json to_json() const;
  static TrainerState from_json(const nlohmann::json& j);
};

struct RunControl {
  int checkpoint_every = 0;  // 0 disables
  std::function<void(const TrainerState&)> on_checkpoint;
  std::optional<TrainerState> resume;
  /// Return after this epoch as if interrupted (testing aid); -1 runs to the end.
  int stop_after_epoch = -1;
};

struct TrainResult {
  seq::ModelParams learner;
  MetricsLog log;
  bool completed = true;
};

/// Cross-entropy training for cfg.pretrain_epochs epochs. A `monitor` teacher, if given,
/// only contributes the reported transfer loss and validation divergence.
TrainResult ce_pretrain(const seq::ModelParams& learner, const seq::Corpus& corpus,
                        const TrainConfig& cfg, const EvalConfig& eval,
                        const TeacherEvaluator* monitor = nullptr, const RunControl& ctl = {});

/// Fine-tunes against a frozen teacher for cfg.epochs epochs.
TrainResult finetune(const seq::ModelParams& learner, const TeacherEvaluator& teacher,
                     const seq::Corpus& corpus, const TrainConfig& cfg, const EvalConfig& eval,
                     const RunControl& ctl = {});

/// Deterministic permutation of 0..n-1 for (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

}  // namespace ktlab::train
