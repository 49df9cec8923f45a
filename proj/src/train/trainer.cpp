#include "ktlab/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ktlab/error.hpp"
#include "ktlab/io.hpp"
#include "ktlab/metrics/bleu.hpp"
#include "ktlab/seq/checkpoint.hpp"

namespace ktlab::train {

using seq::ModelParams;
using seq::SentencePair;
using seq::TokenId;
using seq::Vec;

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("train: lambda must lie in [0,1]");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("train: learning_rate must be positive and finite");
  }
  if (epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
  if (pretrain_epochs < 0) throw InvalidArgument("train: pretrain_epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (topk && topk->k < 1) throw InvalidArgument("train: topk.k must be >= 1");
  adam.validate();
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch) + 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

std::vector<ProbePosition> sample_probes(std::span<const SentencePair> pairs, std::size_t count,
                                         std::uint64_t seed) {
  std::vector<ProbePosition> all;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t t = 0; t < pairs[i].target.size(); ++t) all.push_back({i, t});
  }
  if (count < all.size()) {
    std::mt19937_64 rng(seed ^ 0xD1B54A32D192ED03ULL);
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(all[i], all[i + rng() % (all.size() - i)]);
    }
    all.resize(count);
    std::sort(all.begin(), all.end(), [](const ProbePosition& a, const ProbePosition& b) {
      return a.pair != b.pair ? a.pair < b.pair : a.position < b.position;
    });
  }
  return all;
}

// ---- metrics log ----------------------------------------------------------------------

nlohmann::json to_json(const EpochMetrics& m) {
  nlohmann::json j{{"epoch", m.epoch},
                   {"nll_loss", m.nll_loss},
                   {"transfer_loss", m.transfer_loss},
                   {"total_loss", m.total_loss},
                   {"mean_position_entropy", m.mean_position_entropy},
                   {"validation_score", m.validation_score},
                   {"topk_sets", m.topk_sets}};
  j["validation_divergence"] =
      m.validation_divergence ? nlohmann::json(*m.validation_divergence) : nlohmann::json(nullptr);
  return j;
}

EpochMetrics epoch_metrics_from_json(const nlohmann::json& j) {
  EpochMetrics m;
  m.epoch = j.at("epoch").get<int>();
  m.nll_loss = j.at("nll_loss").get<double>();
  m.transfer_loss = j.at("transfer_loss").get<double>();
  m.total_loss = j.at("total_loss").get<double>();
  m.mean_position_entropy = j.at("mean_position_entropy").get<double>();
  m.validation_score = j.at("validation_score").get<double>();
  if (!j.at("validation_divergence").is_null()) {
    m.validation_divergence = j.at("validation_divergence").get<double>();
  }
  m.topk_sets = j.at("topk_sets").get<std::vector<std::vector<TokenId>>>();
  return m;
}

void MetricsLog::validate() const {
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& m = epochs[i];
    if (i > 0 && m.epoch <= epochs[i - 1].epoch) {
      throw InvalidArgument("metrics log: epoch " + std::to_string(m.epoch) + " out of order");
    }
    const double vals[] = {m.nll_loss, m.transfer_loss, m.total_loss, m.mean_position_entropy,
                           m.validation_score, m.validation_divergence.value_or(0.0)};
    for (double v : vals) {
      if (!std::isfinite(v)) {
        throw NumericalError("metrics log: non-finite value at epoch " + std::to_string(m.epoch));
      }
    }
  }
}

std::string MetricsLog::to_jsonl() const {
  std::string out;
  for (const auto& m : epochs) out += to_json(m).dump() + "\n";
  return out;
}

std::string MetricsLog::to_csv() const {
  std::string out =
      "epoch,nll_loss,transfer_loss,total_loss,mean_position_entropy,validation_score,"
      "validation_divergence\n";
  for (const auto& m : epochs) {
    out += std::to_string(m.epoch) + "," + format_double(m.nll_loss) + "," +
           format_double(m.transfer_loss) + "," + format_double(m.total_loss) + "," +
           format_double(m.mean_position_entropy) + "," + format_double(m.validation_score) + "," +
           (m.validation_divergence ? format_double(*m.validation_divergence) : "") + "\n";
  }
  return out;
}

MetricsLog MetricsLog::from_jsonl(const std::string& text) {
  MetricsLog log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    log.epochs.push_back(epoch_metrics_from_json(nlohmann::json::parse(line)));
  }
  log.validate();
  return log;
}

// ---- losses ---------------------------------------------------------------------------

TeacherCache cache_teacher(const TeacherEvaluator& teacher, std::span<const SentencePair> pairs) {
  TeacherCache out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(teacher.position_dists(p));
  return out;
}

namespace {

double position_divergence(const Categorical& p, const Categorical& q, DivergenceMode mode,
                           const std::optional<TruncationSpec>& topk) {
  return topk ? truncated_divergence(p, q, *topk, mode) : divergence(p, q, mode);
}

bool all_finite(const ModelParams& m) {
  bool ok = true;
  m.for_each_block([&](const std::string&, std::span<const double> v) {
    for (double x : v) ok = ok && std::isfinite(x);
  });
  return ok;
}

}  // namespace

BatchLoss batch_loss(const ModelParams& learner, std::span<const SentencePair> batch,
                     const std::vector<const std::vector<Categorical>*>& teacher, double lambda,
                     DivergenceMode mode, const std::optional<TruncationSpec>& topk,
                     ModelParams* grads) {
  const bool has_teacher = !teacher.empty();
  if (has_teacher && teacher.size() != batch.size()) {
    throw InvalidArgument("batch_loss: teacher/batch size mismatch");
  }
  std::size_t positions = 0;
  for (const auto& p : batch) positions += p.target.size();
  if (positions == 0) throw InvalidArgument("batch_loss: empty batch");
  const double scale = 1.0 / static_cast<double>(positions);
  const std::size_t V = static_cast<std::size_t>(learner.dims().target_vocab);

  BatchLoss out;
  out.positions = positions;
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& pair = batch[b];
    const auto pass = seq::teacher_forced(learner, pair.source, pair.target);
    const std::vector<Categorical>* q = has_teacher ? teacher[b] : nullptr;
    if (q && q->size() != pair.target.size()) {
      throw InvalidArgument("batch_loss: teacher positions do not match target length");
    }
    std::vector<Vec> d_logits;
    if (grads) d_logits.reserve(pair.target.size());
    for (std::size_t t = 0; t < pair.target.size(); ++t) {
      const Vec& z = pass.logits[t];
      Logits logits(std::vector<double>(z.data(), z.data() + z.size()));
      const Categorical p = softmax(logits);
      const auto y = static_cast<std::size_t>(pair.target[t]);
      const double ce = log_sum_exp(logits.values()) - z[static_cast<Eigen::Index>(y)];
      double d = 0.0;
      if (q) {
        if ((*q)[t].size() != V) throw InvalidArgument("batch_loss: teacher vocab mismatch");
        d = position_divergence(p, (*q)[t], mode, topk);
      }
      out.nll += ce;
      out.transfer += d;
      total += (1.0 - lambda) * ce + lambda * d;
      if (grads) {
        Vec g = Vec::Zero(static_cast<Eigen::Index>(V));
        if (lambda < 1.0) {
          for (std::size_t i = 0; i < V; ++i) g[static_cast<Eigen::Index>(i)] = (1.0 - lambda) * p[i];
          g[static_cast<Eigen::Index>(y)] -= (1.0 - lambda);
        }
        if (q && lambda > 0.0) {
          const auto gd = grad_wrt_logits(logits, (*q)[t], mode, topk);
          for (std::size_t i = 0; i < V; ++i) g[static_cast<Eigen::Index>(i)] += lambda * gd[i];
        }
        d_logits.push_back(g * scale);
      }
    }
    if (grads) seq::backward(learner, pass, pair.source, pair.target, d_logits, *grads);
  }
  out.nll *= scale;
  out.transfer *= scale;
  out.total = total * scale;
  return out;
}

TransferLoss transfer_loss(const ModelParams& learner, const TeacherEvaluator& teacher,
                           const SentencePair& pair, DivergenceMode mode,
                           const std::optional<TruncationSpec>& topk) {
  if (teacher.vocab_size() != learner.dims().target_vocab) {
    throw InvalidArgument("transfer_loss: teacher vocab " + std::to_string(teacher.vocab_size()) +
                          " != learner vocab " + std::to_string(learner.dims().target_vocab));
  }
  const auto q = teacher.position_dists(pair);
  const auto pass = seq::teacher_forced(learner, pair.source, pair.target);
  TransferLoss out{0.0, ModelParams::zeros(learner.dims())};
  std::vector<Vec> d_logits;
  for (std::size_t t = 0; t < pair.target.size(); ++t) {
    const Vec& z = pass.logits[t];
    Logits logits(std::vector<double>(z.data(), z.data() + z.size()));
    out.loss += position_divergence(softmax(logits), q[t], mode, topk);
    const auto g = grad_wrt_logits(logits, q[t], mode, topk);
    d_logits.push_back(Eigen::Map<const Vec>(g.data(), static_cast<Eigen::Index>(g.size())));
  }
  seq::backward(learner, pass, pair.source, pair.target, d_logits, out.grads);
  return out;
}

// ---- state ----------------------------------------------------------------------------

nlohmann::json TrainerState::to_json() const {
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : log.epochs) metrics.push_back(train::to_json(m));
  return {{"format", "ktlab-trainer-state"},
          {"version", 1},
          {"epoch", epoch},
          {"learner", seq::params_to_json(learner)},
          {"optimizer", optimizer},
          {"metrics", metrics}};
}

TrainerState TrainerState::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ktlab-trainer-state" || j.value("version", 0) != 1) {
    throw InvalidArgument("trainer state: unrecognized format or version");
  }
  TrainerState s;
  s.epoch = j.at("epoch").get<int>();
  s.learner = seq::params_from_json(j.at("learner"));
  s.optimizer = j.at("optimizer");
  for (const auto& m : j.at("metrics")) s.log.epochs.push_back(epoch_metrics_from_json(m));
  s.log.validate();
  return s;
}

// ---- training loop --------------------------------------------------------------------

namespace {

struct RunSpec {
  const TeacherEvaluator* teacher = nullptr;
  double lambda = 0.0;
  int epochs = 0;
  const char* phase = "";
};

class Evaluator {
 public:
  Evaluator(const seq::Corpus& corpus, const TeacherEvaluator* teacher, const EvalConfig& eval,
            DivergenceMode mode)
      : corpus_(corpus), eval_(eval), mode_(mode) {
    eval_.beam.validate();
    if (teacher) {
      train_q_ = cache_teacher(*teacher, corpus.train);
      valid_q_ = cache_teacher(*teacher, corpus.valid);
    }
    for (const auto& pr : eval_.probes) {
      if (pr.pair >= corpus.train.size() || pr.position >= corpus.train[pr.pair].target.size()) {
        throw InvalidArgument("eval: probe position out of range");
      }
    }
    for (const auto& p : corpus.valid) refs_.push_back({p.target});
  }

  std::vector<const std::vector<Categorical>*> teacher_for(std::span<const std::size_t> idx) const {
    std::vector<const std::vector<Categorical>*> out;
    if (train_q_.empty()) return out;
    for (auto i : idx) out.push_back(&train_q_[i]);
    return out;
  }

  EpochMetrics measure(const ModelParams& learner, int epoch, double lambda,
                       const std::optional<TruncationSpec>& topk) const {
    EpochMetrics m;
    m.epoch = epoch;
    std::vector<std::size_t> all(corpus_.train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto loss = batch_loss(learner, corpus_.train, teacher_for(all), lambda, mode_, topk, nullptr);
    m.nll_loss = loss.nll;
    m.transfer_loss = loss.transfer;
    m.total_loss = loss.total;

    double ent = 0.0;
    double div = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < corpus_.valid.size(); ++i) {
      const auto& pair = corpus_.valid[i];
      const auto ps = seq::position_dists(learner, pair.source, pair.target);
      for (std::size_t t = 0; t < ps.size(); ++t) {
        ent += entropy(ps[t]);
        if (!valid_q_.empty()) div += divergence(ps[t], valid_q_[i][t], mode_);
        ++n;
      }
    }
    if (n > 0) {
      m.mean_position_entropy = ent / static_cast<double>(n);
      if (!valid_q_.empty()) m.validation_divergence = div / static_cast<double>(n);
    }

    if (eval_.decode_validation && !corpus_.valid.empty()) {
      std::vector<metrics::Sentence> hyps;
      hyps.reserve(corpus_.valid.size());
      for (const auto& pair : corpus_.valid) {
        hyps.push_back(seq::beam_search(learner, pair.source, eval_.beam).front().tokens);
      }
      m.validation_score = metrics::bleu(hyps, refs_);
    }

    for (const auto& pr : eval_.probes) {
      const auto& pair = corpus_.train[pr.pair];
      std::vector<TokenId> prefix(pair.target.begin(), pair.target.begin() + pr.position + 1);
      const auto ps = seq::position_dists(learner, pair.source, prefix);
      const auto& p = ps[pr.position];
      const auto k = std::min(eval_.probe_k, p.size());
      std::vector<TokenId> ids;
      for (auto i : top_k_indices(p.probs(), k)) ids.push_back(static_cast<TokenId>(i));
      m.topk_sets.push_back(std::move(ids));
    }
    return m;
  }

 private:
  const seq::Corpus& corpus_;
  EvalConfig eval_;
  DivergenceMode mode_;
  TeacherCache train_q_;
  TeacherCache valid_q_;
  std::vector<std::vector<metrics::Sentence>> refs_;
};

TrainResult run(const ModelParams& init, const seq::Corpus& corpus, const TrainConfig& cfg,
                const EvalConfig& eval, const RunSpec& spec, const RunControl& ctl) {
  cfg.validate();
  init.validate();
  if (corpus.train.empty()) throw InvalidArgument("train: empty training split");
  const auto dims = init.dims();
  if (dims.source_vocab != corpus.source_vocab.size() ||
      dims.target_vocab != corpus.target_vocab.size()) {
    throw InvalidArgument("train: model vocab does not match corpus vocab");
  }
  if (spec.teacher && spec.teacher->vocab_size() != dims.target_vocab) {
    throw InvalidArgument("train: teacher vocab " + std::to_string(spec.teacher->vocab_size()) +
                          " != learner vocab " + std::to_string(dims.target_vocab));
  }
  for (const auto& p : corpus.train) p.validate(dims.source_vocab, dims.target_vocab);
  for (const auto& p : corpus.valid) p.validate(dims.source_vocab, dims.target_vocab);

  Evaluator evaluator(corpus, spec.teacher, eval, cfg.mode);
  TrainResult res{init, {}, true};
  Adam adam(cfg.adam, cfg.learning_rate, init.num_parameters());
  int start = 0;
  if (ctl.resume) {
    if (ctl.resume->learner.dims() != dims) throw InvalidArgument("resume: model dims differ");
    res.learner = ctl.resume->learner;
    adam.load_state(ctl.resume->optimizer);
    res.log = ctl.resume->log;
    start = ctl.resume->epoch;
    log_event("info", "resume", {{"phase", spec.phase}, {"epoch", start}});
  } else {
    res.log.epochs.push_back(evaluator.measure(res.learner, 0, spec.lambda, cfg.topk));
  }

  const std::size_t n = corpus.train.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  auto grads = ModelParams::zeros(dims);
  for (int epoch = start + 1; epoch <= spec.epochs; ++epoch) {
    const auto order = epoch_order(n, cfg.seed, epoch);
    std::vector<SentencePair> batch;
    for (std::size_t b0 = 0, bi = 0; b0 < n; b0 += bs, ++bi) {
      const std::span<const std::size_t> idx(order.data() + b0, std::min(bs, n - b0));
      batch.clear();
      for (auto i : idx) batch.push_back(corpus.train[i]);
      grads.set_zero();
      const auto loss = batch_loss(res.learner, batch, evaluator.teacher_for(idx), spec.lambda,
                                   cfg.mode, cfg.topk, &grads);
      if (!std::isfinite(loss.total) || !all_finite(grads)) {
        throw NumericalError(std::string(spec.phase) + ": non-finite loss or gradient at epoch " +
                             std::to_string(epoch) + " batch " + std::to_string(bi));
      }
      adam.step(res.learner, grads);
      if (!all_finite(res.learner)) {
        throw NumericalError(std::string(spec.phase) + ": non-finite parameters at epoch " +
                             std::to_string(epoch) + " batch " + std::to_string(bi));
      }
    }
    auto m = evaluator.measure(res.learner, epoch, spec.lambda, cfg.topk);
    log_event("info", "epoch",
              {{"phase", spec.phase},
               {"epoch", epoch},
               {"total_loss", m.total_loss},
               {"entropy", m.mean_position_entropy},
               {"bleu", m.validation_score}});
    res.log.epochs.push_back(std::move(m));
    res.log.validate();

    if (ctl.checkpoint_every > 0 && epoch % ctl.checkpoint_every == 0 && ctl.on_checkpoint) {
      ctl.on_checkpoint(TrainerState{res.learner, adam.state_to_json(), epoch, res.log});
    }
    if (epoch == ctl.stop_after_epoch && epoch < spec.epochs) {
      res.completed = false;
      return res;
    }
  }
  return res;
}

}  // namespace

TrainResult ce_pretrain(const ModelParams& learner, const seq::Corpus& corpus,
                        const TrainConfig& cfg, const EvalConfig& eval,
                        const TeacherEvaluator* monitor, const RunControl& ctl) {
  return run(learner, corpus, cfg, eval, {monitor, 0.0, cfg.pretrain_epochs, "pretrain"}, ctl);
}

TrainResult finetune(const ModelParams& learner, const TeacherEvaluator& teacher,
                     const seq::Corpus& corpus, const TrainConfig& cfg, const EvalConfig& eval,
                     const RunControl& ctl) {
  const auto* model_teacher = dynamic_cast<const ModelTeacherEvaluator*>(&teacher);
  const auto before = model_teacher ? model_teacher->params().checksum() : 0;
  auto res = run(learner, corpus, cfg, eval, {&teacher, cfg.lambda, cfg.epochs, "finetune"}, ctl);
  if (model_teacher && model_teacher->params().checksum() != before) {
    throw NumericalError("finetune: teacher parameters changed during training");
  }
  return res;
}

}  // namespace ktlab::train
