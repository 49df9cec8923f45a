// ktlab: toy | transfer | analyze | version
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ktlab/cli/commands.hpp"
#include "ktlab/cli/config.hpp"
#include "ktlab/error.hpp"
#include "ktlab/io.hpp"
#include "ktlab/version.hpp"

namespace {

using namespace ktlab;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  cli::RunOptions run;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Experiment config (JSON); built-in defaults if omitted");
  sub->add_option("--out", c.out, "Output directory (overrides output_dir)");
  sub->add_option("--seed", c.seed, "Base seed (overrides seed)");
  sub->add_flag("--dry-run", c.run.dry_run, "Validate the config, print the plan, write nothing");
}

cli::ExperimentConfig resolve(const Common& c) {
  cli::ExperimentConfig cfg = c.config.empty() ? cli::ExperimentConfig{} : cli::load_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward/backward KL knowledge-transfer lab"};
  app.require_subcommand(1);
  Common common;

  auto* toy = app.add_subcommand("toy", "Top-k truncated toy experiment, both KL orders");
  add_common(toy, common);

  auto* transfer = app.add_subcommand("transfer", "Pretrain, fine-tune (KD/KA/JSD), evaluate");
  add_common(transfer, common);
  transfer->add_flag("--resume", common.run.resume, "Continue from checkpoints in the output directory");
  transfer->add_option("--halt-after-epoch", common.run.halt_after_epoch,
                       "Stop each training phase after this epoch (exit 5)");

  auto* analyze = app.add_subcommand("analyze", "Gradient-region report and identity checks");
  add_common(analyze, common);
  analyze->add_flag("--check-lagrangian", common.run.check_lagrangian,
                    "Recover the Lagrange multipliers and compare with +1 / -1");
  analyze->add_option("--soft-q", common.run.soft_q, "Check the soft-Q identity on N random instances");

  app.add_subcommand("version", "Print version information");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kExitConfig;
  }

  if (app.got_subcommand("version")) {
    std::cout << "ktlab " << kVersion << " (config schema " << cli::kSchemaVersion << ")\n";
    return cli::kExitOk;
  }

  try {
    const auto cfg = resolve(common);
    if (app.got_subcommand("toy")) return cli::cmd_toy(cfg, common.run, std::cout);
    if (app.got_subcommand("transfer")) return cli::cmd_transfer(cfg, common.run, std::cout);
    return cli::cmd_analyze(cfg, common.run, std::cout);
  } catch (const cli::ConfigError& e) {
    log_event("error", "config", {{"message", e.what()}});
    return cli::kExitConfig;
  } catch (const NumericalError& e) {
    log_event("error", "numerical", {{"message", e.what()}});
    return cli::kExitNumerical;
  } catch (const cli::Interrupted& e) {
    log_event("warn", "interrupted", {{"message", e.what()}});
    return cli::kExitInterrupted;
  } catch (const std::exception& e) {
    log_event("error", "failure", {{"message", e.what()}});
    return cli::kExitFailure;
  }
}
