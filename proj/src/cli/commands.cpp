#include "ktlab/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <random>
#include <thread>

#include "ktlab/gradient_analysis.hpp"
#include "ktlab/io.hpp"
#include "ktlab/metrics/dialog.hpp"
#include "ktlab/metrics/exploration.hpp"
#include "ktlab/seq/checkpoint.hpp"
#include "ktlab/version.hpp"

namespace ktlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

unsigned resolve_workers(unsigned configured) {
  unsigned n = configured ? configured : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("KTLAB_WORKERS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

std::string mode_file_stem(const DivergenceMode& mode) {
  auto s = mode.name();
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}

namespace {

void print_plan(std::ostream& out, const std::string& command, const ExperimentConfig& cfg,
                const std::vector<fs::path>& outputs) {
  json files = json::array();
  for (const auto& p : outputs) files.push_back(p.string());
  out << json{{"command", command}, {"config", cfg.to_json()}, {"outputs", files}}.dump(2) << "\n";
}

}  // namespace

// ---- toy ------------------------------------------------------------------------------

ToyOutcome run_toy_experiment(const ExperimentConfig& cfg) {
  ToyOutcome res;
  auto base = cfg.toy.base;
  base.seed = cfg.seed;
  res.base = toy::compare_orders(base);

  const auto& q = base.teacher;
  const auto head = top_k_indices(q.probs(), base.k);
  std::vector<std::size_t> tail;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (std::find(head.begin(), head.end(), i) == head.end()) tail.push_back(i);
  }

  std::size_t tail_wins = 0;
  std::size_t loss_wins = 0;
  for (int s = 0; s < cfg.toy.seeds; ++s) {
    auto c = base;
    c.seed = cfg.seed + static_cast<std::uint64_t>(s);
    const auto cmp = toy::compare_orders(c);
    ToySeedRow row;
    row.seed = c.seed;
    row.forward_error = cmp.forward_summary.final_abs_error;
    row.backward_error = cmp.backward_summary.final_abs_error;
    row.forward_loss = cmp.forward_summary.final_truncated_loss;
    row.backward_loss = cmp.backward_summary.final_truncated_loss;
    row.tail_win = !tail.empty();
    for (auto i : tail) row.tail_win = row.tail_win && row.backward_error[i] < row.forward_error[i];
    row.loss_win = row.backward_loss <= row.forward_loss;
    tail_wins += row.tail_win;
    loss_wins += row.loss_win;
    res.seeds.push_back(std::move(row));
  }
  res.tail_win_rate = static_cast<double>(tail_wins) / cfg.toy.seeds;
  res.loss_win_rate = static_cast<double>(loss_wins) / cfg.toy.seeds;
  return res;
}

int cmd_toy(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out) {
  const fs::path dir = cfg.output_dir / "toy";
  const std::vector<fs::path> outputs{dir / "forward.csv", dir / "backward.csv",
                                      dir / "comparison.json", dir / "seeds.csv"};
  if (opts.dry_run) {
    print_plan(out, "toy", cfg, outputs);
    return kExitOk;
  }
  const auto res = run_toy_experiment(cfg);
  std::string seeds = "seed";
  const std::size_t n = cfg.toy.base.teacher.size();
  for (const char* side : {"forward", "backward"}) {
    for (std::size_t i = 0; i < n; ++i) seeds += std::string(",") + side + "_err" + std::to_string(i);
  }
  seeds += ",forward_loss,backward_loss,tail_win,loss_win\n";
  for (const auto& r : res.seeds) {
    seeds += std::to_string(r.seed);
    for (double e : r.forward_error) seeds += "," + format_double(e);
    for (double e : r.backward_error) seeds += "," + format_double(e);
    seeds += "," + format_double(r.forward_loss) + "," + format_double(r.backward_loss) + "," +
             (r.tail_win ? "1" : "0") + "," + (r.loss_win ? "1" : "0") + "\n";
  }
  write_file_atomic(outputs[0], res.base.forward.to_csv());
  write_file_atomic(outputs[1], res.base.backward.to_csv());
  write_file_atomic(outputs[2], res.base.to_json());
  write_file_atomic(outputs[3], seeds);
  out << "toy: backward closer on the tail in " << res.tail_win_rate * 100.0 << "% of "
      << res.seeds.size() << " seeds; backward truncated loss <= forward in "
      << res.loss_win_rate * 100.0 << "%\n";
  return kExitOk;
}

// ---- transfer -------------------------------------------------------------------------

namespace {

struct Phase {
  fs::path dir;
  std::string name;
  int checkpoint_every = 0;
  const RunOptions* opts = nullptr;

  fs::path final_path() const { return dir / (name + ".final.json"); }
  fs::path state_path() const { return dir / (name + ".state.json"); }

  train::TrainResult run(const std::function<train::TrainResult(const train::RunControl&)>& fn) const {
    if (opts->resume && fs::exists(final_path())) {
      auto st = train::TrainerState::from_json(json::parse(read_file(final_path())));
      log_event("info", "phase_reused", {{"phase", name}, {"dir", dir.string()}});
      return {std::move(st.learner), std::move(st.log), true};
    }
    train::RunControl ctl;
    ctl.checkpoint_every = checkpoint_every;
    ctl.stop_after_epoch = opts->halt_after_epoch;
    ctl.on_checkpoint = [this](const train::TrainerState& st) {
      write_file_atomic(state_path(), st.to_json().dump());
    };
    if (opts->resume && fs::exists(state_path())) {
      ctl.resume = train::TrainerState::from_json(json::parse(read_file(state_path())));
    }
    auto res = fn(ctl);
    if (!res.completed) {
      throw Interrupted(dir.string() + ": " + name + " halted at epoch " +
                        std::to_string(res.log.epochs.back().epoch));
    }
    const int epoch = res.log.epochs.empty() ? 0 : res.log.epochs.back().epoch;
    write_file_atomic(final_path(), train::TrainerState{res.learner, nullptr, epoch, res.log}.to_json().dump());
    std::error_code ec;
    fs::remove(state_path(), ec);
    return res;
  }
};

struct SeedWork {
  std::uint64_t seed = 0;
  fs::path dir;
  seq::GenSpec spec;
  std::optional<seq::Corpus> corpus;
  std::unique_ptr<train::TeacherEvaluator> teacher;
  train::EvalConfig eval;
  train::TrainResult pretrain;
  std::size_t probe_k = 0;
};

seq::ModelDims learner_dims(const seq::GenSpec& spec, int hidden) {
  return {spec.source_vocab().size(), spec.target_vocab().size(), hidden};
}

std::vector<metrics::Curve> mean_curves(const std::vector<SeedOutcome>& seeds,
                                        const std::vector<DivergenceMode>& modes,
                                        const std::function<metrics::Curve(const ModeOutcome&)>& get) {
  std::vector<metrics::Curve> out;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    metrics::Curve mean;
    for (const auto& s : seeds) {
      const auto c = get(s.modes[m]);
      if (mean.epochs.empty()) {
        mean = c;
      } else {
        for (std::size_t i = 0; i < c.values.size(); ++i) mean.values[i] += c.values[i];
      }
    }
    for (auto& v : mean.values) v /= static_cast<double>(seeds.size());
    mean.mode = modes[m].name();
    out.push_back(std::move(mean));
  }
  return out;
}

std::vector<fs::path> transfer_outputs(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.output_dir / "transfer";
  std::vector<fs::path> out{dir / "summary.csv", dir / "summary.json", dir / "fig4b.csv",
                            dir / "fig5.csv"};
  if (!cfg.metrics.sweep_ks.empty()) out.push_back(dir / "fig4a.csv");
  for (int i = 0; i < cfg.transfer.seeds; ++i) {
    const fs::path sd = dir / ("seed_" + std::to_string(cfg.seed + static_cast<std::uint64_t>(i)));
    out.push_back(sd / "corpus.tsv");
    out.push_back(sd / "pretrain.jsonl");
    for (const auto& m : cfg.transfer.modes) {
      out.push_back(sd / (mode_file_stem(m) + ".jsonl"));
      out.push_back(sd / (mode_file_stem(m) + ".csv"));
    }
    out.push_back(sd / "dialog.txt");
  }
  return out;
}

// Checks that need the generated vocabulary, done for every seed before anything is written.
void preflight(const ExperimentConfig& cfg) {
  for (int i = 0; i < cfg.transfer.seeds; ++i) {
    auto g = cfg.corpus;
    g.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const auto spec = seq::make_gen_spec(g);
    const auto V = static_cast<std::size_t>(spec.target_vocab().size());
    for (auto k : cfg.metrics.sweep_ks) {
      if (k > V) {
        throw ConfigError("$.metrics.sweep_ks: k=" + std::to_string(k) +
                          " exceeds the target vocabulary (" + std::to_string(V) + ")");
      }
    }
    if (cfg.teacher.kind == "oracle" && cfg.teacher.smoothing == 0.0) {
      for (const auto& m : cfg.transfer.modes) {
        if (m.backward_weight() > 0.0) {
          throw ConfigError("$.teacher.smoothing: must be > 0 for mode " + m.name() +
                            " (the oracle assigns zero probability to some tokens)");
        }
      }
    }
  }
}

}  // namespace

TransferOutcome run_transfer_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  preflight(cfg);
  const fs::path root = cfg.output_dir / "transfer";
  const unsigned workers = resolve_workers(cfg.workers);
  const auto& modes = cfg.transfer.modes;
  const std::size_t S = static_cast<std::size_t>(cfg.transfer.seeds);

  std::vector<SeedWork> work(S);
  metrics::parallel_for(S, workers, [&](std::size_t i) {
    auto& w = work[i];
    w.seed = cfg.seed + i;
    w.dir = root / ("seed_" + std::to_string(w.seed));
    auto g = cfg.corpus;
    g.seed = w.seed;
    w.spec = seq::make_gen_spec(g);
    w.corpus.emplace(seq::synth_corpus(w.spec, cfg.transfer.pairs));
    write_file_atomic(w.dir / "corpus.tsv",
                      seq::corpus_to_tsv(w.corpus->train, w.corpus->source_vocab, w.corpus->target_vocab));
    const auto V = static_cast<std::size_t>(w.corpus->target_vocab.size());
    w.probe_k = std::min(cfg.metrics.probe_k, V);
    w.eval.beam = cfg.metrics.beam;
    w.eval.probes = train::sample_probes(w.corpus->train, cfg.metrics.probes, w.seed);
    w.eval.probe_k = w.probe_k;

    train::TrainConfig tc = cfg.train;
    tc.seed = w.seed;
    if (cfg.teacher.kind == "oracle") {
      w.teacher = std::make_unique<train::OracleTeacherEvaluator>(w.spec, cfg.teacher.smoothing);
    } else {
      auto tcfg = tc;
      tcfg.learning_rate = cfg.teacher.learning_rate;
      tcfg.pretrain_epochs = cfg.teacher.epochs;
      train::EvalConfig tev = w.eval;
      tev.decode_validation = false;
      const auto init = seq::ModelParams::random(learner_dims(w.spec, cfg.teacher.hidden),
                                                 w.seed ^ 0x5851F42D4C957F2DULL);
      Phase ph{w.dir, "teacher", cfg.transfer.checkpoint_every, &opts};
      auto res = ph.run([&](const train::RunControl& ctl) {
        return train::ce_pretrain(init, *w.corpus, tcfg, tev, nullptr, ctl);
      });
      w.teacher = std::make_unique<train::ModelTeacherEvaluator>(std::move(res.learner));
    }

    const auto init = seq::ModelParams::random(learner_dims(w.spec, cfg.learner.hidden), w.seed,
                                               cfg.learner.init_scale);
    Phase ph{w.dir, "pretrain", cfg.transfer.checkpoint_every, &opts};
    w.pretrain = ph.run([&](const train::RunControl& ctl) {
      return train::ce_pretrain(init, *w.corpus, tc, w.eval, nullptr, ctl);
    });
    write_file_atomic(w.dir / "pretrain.jsonl", w.pretrain.log.to_jsonl());
  });

  TransferOutcome res;
  res.seeds.resize(S);
  std::vector<std::vector<train::TrainResult>> tuned(S, std::vector<train::TrainResult>(modes.size()));
  metrics::parallel_for(S * modes.size(), workers, [&](std::size_t job) {
    const std::size_t i = job / modes.size();
    const std::size_t m = job % modes.size();
    auto& w = work[i];
    train::TrainConfig tc = cfg.train;
    tc.seed = w.seed;
    tc.mode = modes[m];
    Phase ph{w.dir, mode_file_stem(modes[m]), cfg.transfer.checkpoint_every, &opts};
    tuned[i][m] = ph.run([&](const train::RunControl& ctl) {
      return train::finetune(w.pretrain.learner, *w.teacher, *w.corpus, tc, w.eval, ctl);
    });
    const auto& log = tuned[i][m].log;
    write_file_atomic(w.dir / (mode_file_stem(modes[m]) + ".jsonl"), log.to_jsonl());
    write_file_atomic(w.dir / (mode_file_stem(modes[m]) + ".csv"), log.to_csv());
  });

  std::vector<std::vector<std::vector<metrics::SweepRow>>> sweeps(
      S, std::vector<std::vector<metrics::SweepRow>>(modes.size()));
  if (!cfg.metrics.sweep_ks.empty()) {
    metrics::parallel_for(S * modes.size(), workers, [&](std::size_t job) {
      const std::size_t i = job / modes.size();
      const std::size_t m = job % modes.size();
      auto& w = work[i];
      train::TrainConfig tc = cfg.train;
      tc.seed = w.seed;
      tc.mode = modes[m];
      sweeps[i][m] = metrics::topk_accuracy_sweep(w.pretrain.learner, *w.teacher, *w.corpus,
                                                  cfg.metrics.sweep_ks, tc, w.eval, 1);
    });
  }

  for (std::size_t i = 0; i < S; ++i) {
    auto& w = work[i];
    auto& so = res.seeds[i];
    so.seed = w.seed;
    so.learner_bleu = w.pretrain.log.epochs.back().validation_score;
    std::string dialog;
    const std::size_t positions = std::min(cfg.metrics.dialog_positions, w.eval.probes.size());
    const auto top_m = std::min<std::size_t>(cfg.metrics.dialog_top_m, w.corpus->target_vocab.size());
    for (std::size_t d = 0; d < positions; ++d) {
      const auto& pr = w.eval.probes[d];
      const auto& pair = w.corpus->train[pr.pair];
      dialog += "== pair " + std::to_string(pr.pair) + ": " + w.corpus->source_vocab.decode(pair.source) +
                " => " + w.corpus->target_vocab.decode(pair.target) + "\n";
      dialog += "-- learner after pre-training\n";
      dialog += metrics::dialog_trace(w.pretrain.learner, *w.teacher, pair, pr.position, top_m)
                    .render(w.corpus->target_vocab);
      for (std::size_t m = 0; m < modes.size(); ++m) {
        dialog += "-- learner after " + modes[m].name() + " fine-tuning\n";
        dialog += metrics::dialog_trace(tuned[i][m].learner, *w.teacher, pair, pr.position, top_m)
                      .render(w.corpus->target_vocab);
      }
    }
    write_file_atomic(w.dir / "dialog.txt", dialog);

    for (std::size_t m = 0; m < modes.size(); ++m) {
      const auto& log = tuned[i][m].log;
      ModeOutcome mo;
      mo.mode = modes[m].name();
      mo.log = log;
      mo.final_bleu = log.epochs.back().validation_score;
      mo.initial_entropy = log.epochs.front().mean_position_entropy;
      mo.final_entropy = log.epochs.back().mean_position_entropy;
      for (auto c : metrics::novel_topk_count(metrics::history_from_log(log, w.probe_k))) {
        mo.novel_total += c;
      }
      so.modes.push_back(std::move(mo));
      for (const auto& row : sweeps[i][m]) so.sweep.push_back(row);
    }
  }

  res.mean_bleu.assign(modes.size(), 0.0);
  for (const auto& s : res.seeds) {
    res.mean_learner_bleu += s.learner_bleu / static_cast<double>(S);
    for (std::size_t m = 0; m < modes.size(); ++m) res.mean_bleu[m] += s.modes[m].final_bleu / static_cast<double>(S);
  }

  std::string summary = "seed,learner";
  for (const auto& m : modes) summary += "," + m.name();
  summary += "\n";
  json seeds_json = json::array();
  for (const auto& s : res.seeds) {
    summary += std::to_string(s.seed) + "," + format_double(s.learner_bleu);
    json sj{{"seed", s.seed}, {"learner_bleu", s.learner_bleu}};
    for (const auto& mo : s.modes) {
      summary += "," + format_double(mo.final_bleu);
      sj["modes"][mo.mode] = {{"bleu", mo.final_bleu},
                              {"initial_entropy", mo.initial_entropy},
                              {"final_entropy", mo.final_entropy},
                              {"novel_total", mo.novel_total}};
    }
    summary += "\n";
    seeds_json.push_back(std::move(sj));
  }
  summary += "mean," + format_double(res.mean_learner_bleu);
  for (double b : res.mean_bleu) summary += "," + format_double(b);
  summary += "\n";
  json mean_json{{"learner", res.mean_learner_bleu}};
  for (std::size_t m = 0; m < modes.size(); ++m) mean_json[modes[m].name()] = res.mean_bleu[m];

  write_file_atomic(root / "summary.csv", summary);
  write_file_atomic(root / "summary.json",
                    json{{"version", kVersion},
                         {"teacher", work.front().teacher->describe()},
                         {"mean_bleu", mean_json},
                         {"seeds", seeds_json}}
                            .dump(2));
  const auto fig5 = mean_curves(res.seeds, modes, [](const ModeOutcome& mo) {
    return metrics::entropy_curve(mo.mode, mo.log);
  });
  write_file_atomic(root / "fig5.csv", metrics::entropy_csv(fig5));
  std::vector<metrics::Curve> fig4b;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    metrics::Curve mean;
    for (std::size_t i = 0; i < S; ++i) {
      const auto c = metrics::novel_count_curve(modes[m].name(), res.seeds[i].modes[m].log, work[i].probe_k);
      if (mean.epochs.empty()) {
        mean = c;
      } else {
        for (std::size_t e = 0; e < c.values.size(); ++e) mean.values[e] += c.values[e];
      }
    }
    for (auto& v : mean.values) v /= static_cast<double>(S);
    fig4b.push_back(std::move(mean));
  }
  std::string fig4b_csv = "epoch,mode,novel_count\n";
  for (const auto& c : fig4b) {
    for (std::size_t e = 0; e < c.epochs.size(); ++e) {
      fig4b_csv += std::to_string(c.epochs[e]) + "," + c.mode + "," + format_double(c.values[e]) + "\n";
    }
  }
  write_file_atomic(root / "fig4b.csv", fig4b_csv);
  if (!cfg.metrics.sweep_ks.empty()) {
    std::vector<metrics::SweepRow> mean_rows;
    for (std::size_t m = 0; m < modes.size(); ++m) {
      for (std::size_t k = 0; k < cfg.metrics.sweep_ks.size(); ++k) {
        double score = 0.0;
        for (std::size_t i = 0; i < S; ++i) score += sweeps[i][m][k].score / static_cast<double>(S);
        mean_rows.push_back({cfg.metrics.sweep_ks[k], modes[m].name(), score});
      }
    }
    write_file_atomic(root / "fig4a.csv", metrics::sweep_csv(mean_rows));
  }
  return res;
}

int cmd_transfer(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out) {
  if (opts.dry_run) {
    preflight(cfg);
    print_plan(out, "transfer", cfg, transfer_outputs(cfg));
    return kExitOk;
  }
  const auto res = run_transfer_experiment(cfg, opts);
  out << "validation BLEU (mean over " << res.seeds.size() << " seeds): learner "
      << format_double(res.mean_learner_bleu);
  for (std::size_t m = 0; m < cfg.transfer.modes.size(); ++m) {
    out << ", " << cfg.transfer.modes[m].name() << " " << format_double(res.mean_bleu[m]);
  }
  out << "\n";
  return kExitOk;
}

// ---- analyze --------------------------------------------------------------------------

namespace {

Categorical random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += (x = ex(rng) + 1e-12);
  for (auto& x : v) x /= s;
  return Categorical(std::move(v));
}

}  // namespace

int cmd_analyze(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out) {
  const fs::path dir = cfg.output_dir / "analyze";
  std::vector<fs::path> outputs{dir / "fig2.csv", dir / "fig2.json", dir / "properties.json"};
  if (opts.check_lagrangian) outputs.push_back(dir / "lagrangian.csv");
  if (opts.soft_q) outputs.push_back(dir / "soft_q.json");
  if (opts.dry_run) {
    print_plan(out, "analyze", cfg, outputs);
    return kExitOk;
  }
  const auto& a = cfg.analyze;
  int exit = kExitOk;

  const auto grid = analysis::discretize(a.grid);
  const auto report = analysis::classify_regions(grid.learner, grid.teacher);
  std::string fig2 = "x,p,q,region,g_forward,g_backward,dominance\n";
  for (const auto& r : report.records) {
    fig2 += format_double(grid.x[r.index]) + "," + format_double(r.p) + "," + format_double(r.q) +
            "," + analysis::to_string(r.region) + "," + format_double(r.g_forward) + "," +
            format_double(r.g_backward) + "," + analysis::to_string(r.dominance) + "\n";
  }

  // Region sign agreement and magnitude dominance on random strictly positive pairs.
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> dim(2, 32);
  std::size_t sign_ok = 0;
  std::size_t dom_ok = 0;
  std::size_t checked = 0;
  for (std::size_t s = 0; s < a.property_samples; ++s) {
    const std::size_t n = dim(rng);
    const auto p = random_simplex(rng, n);
    const auto q = random_simplex(rng, n);
    for (const auto& r : analysis::classify_regions(p, q).records) {
      if (r.region == analysis::Region::Boundary) continue;
      ++checked;
      const bool in_i = r.region == analysis::Region::I;
      sign_ok += in_i ? (r.g_forward < 0 && r.g_backward < 0) : (r.g_forward > 0 && r.g_backward > 0);
      dom_ok += (std::abs(r.g_forward) > std::abs(r.g_backward)) == in_i;
    }
  }
  bool z_ok = std::abs(analysis::z_minus_log_z(1.0) - 1.0) < 1e-12;
  for (int i = -600; i <= 600; ++i) {
    const double z = std::pow(10.0, i / 100.0);
    if (i != 0) z_ok = z_ok && analysis::z_minus_log_z(z) > 1.0;
  }
  json props{{"pairs", a.property_samples},
             {"indices_checked", checked},
             {"sign_agreement", sign_ok},
             {"magnitude_dominance", dom_ok},
             {"z_minus_log_z_grid_ok", z_ok}};
  out << "properties: sign agreement " << sign_ok << "/" << checked << ", dominance " << dom_ok
      << "/" << checked << ", z - ln z >= 1 " << (z_ok ? "ok" : "FAILED") << "\n";

  std::string lagr;
  if (opts.check_lagrangian) {
    lagr = "trial,order,dim,multiplier,expected,abs_error,max_abs_p_minus_q,pass\n";
    std::uniform_int_distribution<int> ld(a.lagrangian_min_dim, a.lagrangian_max_dim);
    bool all = true;
    for (int t = 0; t < a.lagrangian_teachers; ++t) {
      const auto q = random_simplex(rng, static_cast<std::size_t>(ld(rng)));
      for (auto order : {DivergenceMode::forward(), DivergenceMode::backward()}) {
        const double expected = order.kind() == DivergenceMode::Kind::Forward ? 1.0 : -1.0;
        const auto r = analysis::lagrangian_stationarity(order, q);
        double dev = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) dev = std::max(dev, std::abs(r.optimum[i] - q[i]));
        const double err = std::abs(r.multiplier - expected);
        const bool pass = err < 1e-6 && dev < 1e-8;
        all = all && pass;
        lagr += std::to_string(t) + "," + order.name() + "," + std::to_string(q.size()) + "," +
                format_double(r.multiplier) + "," + format_double(expected) + "," +
                format_double(err) + "," + format_double(dev) + "," + (pass ? "1" : "0") + "\n";
        out << "lagrangian " << order.name() << " dim " << q.size() << ": lambda "
            << format_double(r.multiplier) << " (expected " << expected << ") "
            << (pass ? "PASS" : "FAIL") << "\n";
      }
    }
    if (!all) exit = kExitCheckFailed;
  }

  json soft;
  if (opts.soft_q) {
    std::normal_distribution<double> gauss(0.0, 3.0);
    std::vector<std::size_t> hist(8, 0);  // residual decades: <1e-16, [1e-16,1e-15), ..., >=1e-10
    double max_res = 0.0;
    for (std::size_t s = 0; s < *opts.soft_q; ++s) {
      std::vector<double> qv(static_cast<std::size_t>(a.soft_q_dim));
      for (auto& v : qv) v = gauss(rng);
      const auto policy = random_simplex(rng, qv.size());
      const double r = analysis::soft_q_identity_check(qv, policy);
      max_res = std::max(max_res, r);
      std::size_t bin = 0;
      if (r > 0.0) bin = static_cast<std::size_t>(std::clamp(std::floor(std::log10(r)) + 17.0, 0.0, 7.0));
      ++hist[bin];
    }
    const bool pass = max_res < 1e-10;
    soft = {{"instances", *opts.soft_q},
            {"max_residual", max_res},
            {"histogram_decades", {"<1e-16", "1e-16", "1e-15", "1e-14", "1e-13", "1e-12", "1e-11", ">=1e-10"}},
            {"histogram_counts", hist},
            {"pass", pass}};
    out << "soft-q identity: " << *opts.soft_q << " instances, max residual " << format_double(max_res)
        << " " << (pass ? "PASS" : "FAIL") << "\n";
    if (!pass) exit = kExitCheckFailed;
  }

  write_file_atomic(outputs[0], fig2);
  write_file_atomic(outputs[1], report.to_json());
  write_file_atomic(outputs[2], props.dump(2));
  if (opts.check_lagrangian) write_file_atomic(dir / "lagrangian.csv", lagr);
  if (opts.soft_q) write_file_atomic(dir / "soft_q.json", soft.dump(2));
  return exit;
}

}  // namespace ktlab::cli
