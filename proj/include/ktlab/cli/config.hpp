#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ktlab/error.hpp"
#include "ktlab/gradient_analysis.hpp"
#include "ktlab/seq/beam.hpp"
#include "ktlab/seq/corpus.hpp"
#include "ktlab/toy.hpp"
#include "ktlab/train/trainer.hpp"

namespace ktlab::cli {

inline constexpr int kSchemaVersion = 1;

/// Schema violation. The message starts with the offending JSON path.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct ToySection {
  // mode and seed are ignored; both orders run from the top-level seed
  toy::ToyConfig base = [] {
    toy::ToyConfig c;
    c.init = toy::InitKind::RandomLogits;
    return c;
  }();
  int seeds = 20;       // seeds base.seed .. base.seed + seeds - 1 for the sweep summary
};

struct TeacherSection {
  std::string kind = "oracle";  // "oracle" or "model"
  double smoothing = 0.01;      // oracle only
  int hidden = 32;              // model only
  int epochs = 80;              // model only
  double learning_rate = 0.01;  // model only
};

struct LearnerSection {
  int hidden = 16;
  double init_scale = 0.0;  // <= 0 selects 1/sqrt(hidden)
};

struct TransferSection {
  std::vector<DivergenceMode> modes{DivergenceMode::forward(), DivergenceMode::backward(),
                                    DivergenceMode::jsd(0.5)};
  int seeds = 5;
  std::size_t pairs = 2000;
  int checkpoint_every = 1;
};

struct MetricsSection {
  std::size_t probes = 200;
  std::size_t probe_k = 16;
  seq::BeamConfig beam;
  std::vector<std::size_t> sweep_ks{2, 4, 8, 16};
  std::size_t dialog_positions = 3;
  std::size_t dialog_top_m = 10;
};

struct AnalyzeSection {
  analysis::DensityGridConfig grid;
  int lagrangian_teachers = 10;
  int lagrangian_min_dim = 4;
  int lagrangian_max_dim = 64;
  std::size_t property_samples = 100000;
  std::size_t soft_q_instances = 10000;
  int soft_q_dim = 16;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  unsigned workers = 0;  // 0: hardware concurrency
  ToySection toy;
  seq::GeneratorParams corpus;
  TeacherSection teacher;
  LearnerSection learner;
  /// Desk-scale schedule; the optimizer constants keep their library defaults.
  train::TrainConfig train = [] {
    train::TrainConfig t;
    t.learning_rate = 0.01;
    t.epochs = 20;
    t.pretrain_epochs = 80;
    return t;
  }();
  TransferSection transfer;
  MetricsSection metrics;
  AnalyzeSection analyze;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Parse and validate. Missing keys keep their defaults; unknown keys are errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace ktlab::cli
