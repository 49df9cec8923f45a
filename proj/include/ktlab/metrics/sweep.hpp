#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ktlab/train/trainer.hpp"

namespace ktlab::metrics {

struct SweepRow {
  std::size_t k = 0;
  std::string mode;
  double score = 0.0;  // validation BLEU after fine-tuning

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

/// For each k, fine-tunes a fresh copy of `learner` with the transfer term truncated to
/// the learner's top-k and scores validation BLEU. Runs are independent and may use up
/// to `workers` threads; rows come back in the order of `ks`.
std::vector<SweepRow> topk_accuracy_sweep(const seq::ModelParams& learner,
                                          const train::TeacherEvaluator& teacher,
                                          const seq::Corpus& corpus, std::span<const std::size_t> ks,
                                          const train::TrainConfig& cfg,
                                          const train::EvalConfig& eval, unsigned workers = 1);

/// "k,mode,score"
std::string sweep_csv(std::span<const SweepRow> rows);

/// Run fn(0..n-1) on up to `workers` threads. The first exception is rethrown.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace ktlab::metrics
