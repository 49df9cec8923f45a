#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ktlab/error.hpp"
#include "ktlab/seq/beam.hpp"
#include "ktlab/train/adam.hpp"
#include "ktlab/train/teacher.hpp"
#include "ktlab/train/trainer.hpp"
#include "oracles.hpp"

using namespace ktlab;
using namespace ktlab::seq;
using namespace ktlab::train;

namespace {

GenSpec small_spec() {
  GeneratorParams g;
  g.source_tokens = 5;
  g.groups = 4;
  g.max_group_size = 3;
  g.min_length = 2;
  g.max_length = 3;
  g.noise = 0.1;
  g.seed = 17;
  return make_gen_spec(g);
}

struct Fixture {
  GenSpec spec = small_spec();
  Corpus corpus = synth_corpus(spec, 60);
  OracleTeacherEvaluator teacher{spec, 0.05};
  ModelDims dims{corpus.source_vocab.size(), corpus.target_vocab.size(), 6};
  ModelParams learner = ModelParams::random(dims, 2, 0.5);
};

TrainConfig quick_cfg() {
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 3;
  c.pretrain_epochs = 3;
  c.batch_size = 8;
  c.seed = 5;
  return c;
}

EvalConfig quick_eval(const Corpus& corpus) {
  EvalConfig e;
  e.decode_validation = false;
  e.probes = sample_probes(corpus.train, 5, 1);
  e.probe_k = 4;
  return e;
}

std::vector<const std::vector<Categorical>*> pointers(const TeacherCache& c) {
  std::vector<const std::vector<Categorical>*> out;
  for (const auto& v : c) out.push_back(&v);
  return out;
}

}  // namespace

TEST_CASE("batch loss gradient against central differences") {
  Fixture f;
  const std::span<const SentencePair> batch(f.corpus.train.data(), 3);
  const auto cache = cache_teacher(f.teacher, batch);
  const auto q = pointers(cache);
  const std::vector<std::optional<TruncationSpec>> truncs{std::nullopt, TruncationSpec{4}};
  for (double lambda : {0.0, 0.3, 1.0}) {
    for (auto mode : {DivergenceMode::forward(), DivergenceMode::backward(), DivergenceMode::jsd(0.5)}) {
      for (const auto& tr : truncs) {
        auto loss = [&](const std::vector<double>& flat) {
          ModelParams m = f.learner;
          m.assign_flat(flat);
          return batch_loss(m, batch, q, lambda, mode, tr, nullptr).total;
        };
        auto g = ModelParams::zeros(f.dims);
        batch_loss(f.learner, batch, q, lambda, mode, tr, &g);
        const double err = oracle::rel_error(g.flatten(), oracle::central_diff(loss, f.learner.flatten()));
        CAPTURE(lambda);
        CAPTURE(mode.name());
        CHECK(err < 1e-5);
      }
    }
  }
}

TEST_CASE("loss decomposes into its weighted parts") {
  Fixture f;
  const auto cache = cache_teacher(f.teacher, f.corpus.train);
  const auto q = pointers(cache);
  const auto l = batch_loss(f.learner, f.corpus.train, q, 0.3, DivergenceMode::backward(), std::nullopt, nullptr);
  CHECK(std::abs(l.total - (0.7 * l.nll + 0.3 * l.transfer)) < 1e-12);

  // NLL is the per-position mean of -log p(y_t).
  double lp = 0;
  std::size_t n = 0;
  for (const auto& p : f.corpus.train) {
    lp += sequence_logprob(f.learner, p);
    n += p.target.size();
  }
  CHECK(l.positions == n);
  CHECK(l.nll == doctest::Approx(-lp / static_cast<double>(n)).epsilon(1e-12));

  // Transfer is the per-position mean of the divergence, from a long-double reference.
  double kd = 0;
  for (std::size_t i = 0; i < f.corpus.train.size(); ++i) {
    const auto p = position_dists(f.learner, f.corpus.train[i].source, f.corpus.train[i].target);
    for (std::size_t t = 0; t < p.size(); ++t) {
      std::vector<double> pv(p[t].probs().begin(), p[t].probs().end());
      std::vector<double> qv(cache[i][t].probs().begin(), cache[i][t].probs().end());
      kd += oracle::kl(pv, qv);
    }
  }
  CHECK(l.transfer == doctest::Approx(kd / static_cast<double>(n)).epsilon(1e-10));

  const auto none = batch_loss(f.learner, f.corpus.train, {}, 0.0, DivergenceMode::backward(), std::nullopt, nullptr);
  CHECK(none.total == doctest::Approx(l.nll).epsilon(1e-14));
  CHECK(none.transfer == 0.0);
}

TEST_CASE("symmetric mix is the mean of the two directions") {
  Fixture f;
  const auto cache = cache_teacher(f.teacher, f.corpus.train);
  const auto q = pointers(cache);
  auto transfer = [&](DivergenceMode m) {
    return batch_loss(f.learner, f.corpus.train, q, 1.0, m, std::nullopt, nullptr).transfer;
  };
  CHECK(transfer(DivergenceMode::jsd(0.5)) ==
        doctest::Approx(0.5 * transfer(DivergenceMode::forward()) + 0.5 * transfer(DivergenceMode::backward()))
            .epsilon(1e-12));
}

TEST_CASE("transfer loss vanishes when teacher and learner agree") {
  Fixture f;
  const ModelTeacherEvaluator same(f.learner);
  for (auto mode : {DivergenceMode::forward(), DivergenceMode::backward()}) {
    const auto t = transfer_loss(f.learner, same, f.corpus.train[0], mode);
    CHECK(std::abs(t.loss) < 1e-14);
    for (double g : t.grads.flatten()) CHECK(std::abs(g) < 1e-13);
  }
  const ModelTeacherEvaluator other(ModelParams::random({f.dims.source_vocab, f.dims.target_vocab + 1, 6}, 1));
  CHECK_THROWS_AS(transfer_loss(f.learner, other, f.corpus.train[0], DivergenceMode::forward()), InvalidArgument);
}

TEST_CASE("transfer loss gradient against central differences") {
  Fixture f;
  const ModelTeacherEvaluator teacher(ModelParams::random(f.dims, 9, 1.0));
  const auto& pair = f.corpus.train[1];
  for (auto mode : {DivergenceMode::forward(), DivergenceMode::backward()}) {
    const auto t = transfer_loss(f.learner, teacher, pair, mode);
    auto loss = [&](const std::vector<double>& flat) {
      ModelParams m = f.learner;
      m.assign_flat(flat);
      return transfer_loss(m, teacher, pair, mode).loss;
    };
    CHECK(oracle::rel_error(t.grads.flatten(), oracle::central_diff(loss, f.learner.flatten())) < 1e-5);
  }
}

TEST_CASE("adam step matches the textbook update") {
  const ModelDims dims{4, 4, 1};
  auto p = ModelParams::random(dims, 1);
  const auto p0 = p.flatten();
  auto g = ModelParams::random(dims, 2);
  const auto gv = g.flatten();
  Adam opt({}, 0.1, p.num_parameters());
  opt.step(p, g);
  opt.step(p, g);
  // Two identical gradients: m_hat = g and v_hat = g^2 after bias correction.
  const auto p2 = p.flatten();
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double step = 0.1 * gv[i] / (std::abs(gv[i]) + 1e-8);
    CHECK(p2[i] == doctest::Approx(p0[i] - 2 * step).epsilon(1e-9));
  }
  CHECK(opt.steps() == 2);
  Adam copy({}, 0.1, p.num_parameters());
  copy.load_state(opt.state_to_json());
  CHECK(copy.state_to_json() == opt.state_to_json());
  CHECK_THROWS_AS(Adam(AdamConfig{1.0, 0.9, 1e-8}, 0.1, 3), InvalidArgument);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(50, 3, 1);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
  CHECK(epoch_order(50, 3, 1) == a);
  CHECK(epoch_order(50, 3, 2) != a);
  CHECK(epoch_order(50, 4, 1) != a);
}

TEST_CASE("probes are distinct valid positions") {
  Fixture f;
  const auto probes = sample_probes(f.corpus.train, 30, 4);
  CHECK(probes.size() == 30);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    CHECK(probes[i].pair < f.corpus.train.size());
    CHECK(probes[i].position < f.corpus.train[probes[i].pair].target.size());
    for (std::size_t j = 0; j < i; ++j) CHECK_FALSE(probes[i] == probes[j]);
  }
  CHECK(sample_probes(f.corpus.train, 30, 4) == probes);
}

TEST_CASE("fine-tuning is deterministic and leaves the teacher untouched") {
  Fixture f;
  const ModelTeacherEvaluator teacher(ModelParams::random(f.dims, 8, 1.0));
  const auto sum = teacher.params().checksum();
  auto cfg = quick_cfg();
  const auto eval = quick_eval(f.corpus);
  const auto a = finetune(f.learner, teacher, f.corpus, cfg, eval);
  const auto b = finetune(f.learner, teacher, f.corpus, cfg, eval);
  CHECK(a.log == b.log);
  CHECK(a.learner.checksum() == b.learner.checksum());
  CHECK(teacher.params().checksum() == sum);
  CHECK(a.log.epochs.size() == 4);
  CHECK(a.log.epochs[0].epoch == 0);
  for (const auto& m : a.log.epochs) {
    CHECK(m.validation_divergence.has_value());
    CHECK(m.topk_sets.size() == 5);
    for (const auto& s : m.topk_sets) CHECK(s.size() == 4);
  }
  cfg.seed = 6;
  CHECK(finetune(f.learner, teacher, f.corpus, cfg, eval).learner.checksum() != a.learner.checksum());
}

TEST_CASE("pure transfer training lowers validation divergence") {
  Fixture f;
  auto cfg = quick_cfg();
  cfg.lambda = 1.0;
  cfg.mode = DivergenceMode::backward();
  cfg.epochs = 5;
  const auto r = finetune(f.learner, f.teacher, f.corpus, cfg, quick_eval(f.corpus));
  CHECK(*r.log.epochs.back().validation_divergence < *r.log.epochs.front().validation_divergence);
  CHECK(r.log.epochs.back().transfer_loss < r.log.epochs.front().transfer_loss);
}

TEST_CASE("interrupted run resumes to the same result") {
  Fixture f;
  auto cfg = quick_cfg();
  cfg.epochs = 4;
  const auto eval = quick_eval(f.corpus);
  const auto full = finetune(f.learner, f.teacher, f.corpus, cfg, eval);

  std::optional<nlohmann::json> saved;
  RunControl first;
  first.checkpoint_every = 1;
  first.stop_after_epoch = 2;
  first.on_checkpoint = [&](const TrainerState& s) { saved = s.to_json(); };
  const auto part = finetune(f.learner, f.teacher, f.corpus, cfg, eval, first);
  CHECK_FALSE(part.completed);
  REQUIRE(saved.has_value());
  const auto state = TrainerState::from_json(nlohmann::json::parse(saved->dump()));
  CHECK(state.epoch == 2);
  CHECK(state.to_json() == *saved);

  RunControl second;
  second.resume = state;
  const auto rest = finetune(f.learner, f.teacher, f.corpus, cfg, eval, second);
  CHECK(rest.completed);
  CHECK(rest.log == full.log);
  CHECK(rest.learner.flatten() == full.learner.flatten());
}

TEST_CASE("cross-entropy training memorizes a single pair") {
  Fixture f;
  Corpus one{f.corpus.source_vocab, f.corpus.target_vocab, {f.corpus.train[0]}, {f.corpus.train[0]}, {}};
  auto cfg = quick_cfg();
  cfg.pretrain_epochs = 150;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 1;
  EvalConfig eval;
  eval.beam.max_length = 6;
  const auto r = ce_pretrain(f.learner, one, cfg, eval);
  CHECK(std::exp(sequence_logprob(r.learner, one.train[0])) > 0.95);
  BeamConfig beam;
  beam.max_length = 6;
  CHECK(beam_search(r.learner, one.train[0].source, beam).front().tokens == one.train[0].target);
  CHECK_FALSE(r.log.epochs.back().validation_divergence.has_value());
}

TEST_CASE("metrics log serialization") {
  Fixture f;
  const auto r = ce_pretrain(f.learner, f.corpus, quick_cfg(), quick_eval(f.corpus), &f.teacher);
  const auto back = MetricsLog::from_jsonl(r.log.to_jsonl());
  CHECK(back == r.log);
  const auto csv = r.log.to_csv();
  CHECK(csv.rfind("epoch,nll_loss,transfer_loss,total_loss,mean_position_entropy,validation_score,"
                  "validation_divergence\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  auto bad = r.log;
  bad.epochs[2].epoch = 1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = r.log;
  bad.epochs[1].nll_loss = NAN;
  CHECK_THROWS_AS(bad.validate(), NumericalError);
}

TEST_CASE("config validation") {
  auto c = quick_cfg();
  c.lambda = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = quick_cfg();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = quick_cfg();
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_THROWS_AS(OracleTeacherEvaluator(small_spec(), 1.0), InvalidArgument);
}
