#include "ktlab/cli/config.hpp"

#include <set>
#include <thread>

#include "ktlab/io.hpp"

namespace ktlab::cli {
namespace {

using nlohmann::json;

/// Walks one JSON object, remembering which keys were read so leftovers can be reported.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
  }

  std::string at(const char* key) const { return path_ + "." + key; }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) fail(at(key), "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) fail(at(key), "expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) fail(at(key), "expected a number");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v->is_number_unsigned()) fail(at(key), "expected a nonnegative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
    }
    out = v->get<T>();
  }

  template <class F>
  void object(const char* key, F&& f) {
    const json* v = find(key);
    if (!v) return;
    Reader r(*v, at(key));
    f(r);
    r.finish();
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) fail(path_ + "." + k, "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
std::vector<T> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) Reader::fail(path, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& e = v[i];
    const bool ok = std::is_floating_point_v<T> ? e.is_number() : e.is_number_unsigned();
    if (!ok) Reader::fail(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(e.get<T>());
  }
  return out;
}

TruncatedForm parse_form(const std::string& s, const std::string& path) {
  if (s == "relaxed") return TruncatedForm::Relaxed;
  if (s == "plain") return TruncatedForm::Plain;
  Reader::fail(path, "expected \"relaxed\" or \"plain\", got \"" + s + "\"");
}

std::string form_name(TruncatedForm f) { return f == TruncatedForm::Relaxed ? "relaxed" : "plain"; }

DivergenceMode parse_mode(const json& v, const std::string& path) {
  if (!v.is_string()) Reader::fail(path, "expected a mode string");
  try {
    return DivergenceMode::parse(v.get<std::string>());
  } catch (const InvalidArgument& e) {
    Reader::fail(path, e.what());
  }
}

void read_mixture(Reader& r, const char* key, analysis::GaussianMixture& m) {
  r.object(key, [&](Reader& o) {
    if (auto* v = o.find("weights")) m.weights = number_list<double>(*v, o.at("weights"));
    if (auto* v = o.find("means")) m.means = number_list<double>(*v, o.at("means"));
    if (auto* v = o.find("stddevs")) m.stddevs = number_list<double>(*v, o.at("stddevs"));
  });
}

json mixture_json(const analysis::GaussianMixture& m) {
  return {{"weights", m.weights}, {"means", m.means}, {"stddevs", m.stddevs}};
}

// Re-throw library validation failures as schema errors under a section path.
template <class F>
void check(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    Reader::fail(path, e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader root(j, "$");
  if (!root.find("schema_version")) Reader::fail("$.schema_version", "missing");
  root.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    Reader::fail("$.schema_version", "unsupported version " + std::to_string(c.schema_version) +
                                         " (expected " + std::to_string(kSchemaVersion) + ")");
  }
  root.get("seed", c.seed);
  std::string out = c.output_dir.string();
  root.get("output_dir", out);
  c.output_dir = out;
  root.get("workers", c.workers);

  root.object("toy", [&](Reader& r) {
    auto& t = c.toy.base;
    if (auto* v = r.find("teacher")) {
      auto probs = number_list<double>(*v, r.at("teacher"));
      check(r.at("teacher"), [&] { t.teacher = Categorical(probs); });
    }
    r.get("k", t.k);
    std::string form = form_name(t.form);
    r.get("form", form);
    t.form = parse_form(form, r.at("form"));
    r.get("learning_rate", t.learning_rate);
    r.get("epochs", t.epochs);
    std::string init = t.init == toy::InitKind::Uniform ? "uniform" : "random";
    r.get("init", init);
    if (init == "uniform") {
      t.init = toy::InitKind::Uniform;
    } else if (init == "random") {
      t.init = toy::InitKind::RandomLogits;
    } else {
      Reader::fail(r.at("init"), "expected \"uniform\" or \"random\"");
    }
    r.get("init_scale", t.init_scale);
    r.get("seeds", c.toy.seeds);
  });

  root.object("corpus", [&](Reader& r) {
    auto& g = c.corpus;
    r.get("source_tokens", g.source_tokens);
    r.get("groups", g.groups);
    r.get("min_group_size", g.min_group_size);
    r.get("max_group_size", g.max_group_size);
    r.get("emission_skew", g.emission_skew);
    r.get("min_length", g.min_length);
    r.get("max_length", g.max_length);
    r.get("noise", g.noise);
    r.get("pairs", c.transfer.pairs);
  });

  root.object("teacher", [&](Reader& r) {
    r.get("kind", c.teacher.kind);
    r.get("smoothing", c.teacher.smoothing);
    r.get("hidden", c.teacher.hidden);
    r.get("epochs", c.teacher.epochs);
    r.get("learning_rate", c.teacher.learning_rate);
  });

  root.object("learner", [&](Reader& r) {
    r.get("hidden", c.learner.hidden);
    r.get("init_scale", c.learner.init_scale);
  });

  root.object("train", [&](Reader& r) {
    auto& t = c.train;
    r.get("lambda", t.lambda);
    r.get("learning_rate", t.learning_rate);
    r.get("epochs", t.epochs);
    r.get("batch_size", t.batch_size);
    r.get("pretrain_epochs", t.pretrain_epochs);
    r.get("checkpoint_every", c.transfer.checkpoint_every);
    r.object("adam", [&](Reader& a) {
      a.get("beta0", t.adam.beta0);
      a.get("beta1", t.adam.beta1);
      a.get("epsilon", t.adam.epsilon);
    });
    if (const json* v = r.find("topk"); v && !v->is_null()) {
      TruncationSpec spec;
      Reader tr(*v, r.at("topk"));
      tr.get("k", spec.k);
      std::string form = "relaxed";
      tr.get("form", form);
      spec.form = parse_form(form, tr.at("form"));
      tr.finish();
      t.topk = spec;
    }
  });

  root.object("transfer", [&](Reader& r) {
    if (const json* v = r.find("modes")) {
      if (!v->is_array() || v->empty()) Reader::fail(r.at("modes"), "expected a nonempty array");
      c.transfer.modes.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        c.transfer.modes.push_back(parse_mode((*v)[i], r.at("modes") + "[" + std::to_string(i) + "]"));
      }
    }
    r.get("seeds", c.transfer.seeds);
  });

  root.object("metrics", [&](Reader& r) {
    auto& m = c.metrics;
    r.get("probes", m.probes);
    r.get("probe_k", m.probe_k);
    r.get("beam_size", m.beam.beam_size);
    r.get("length_penalty", m.beam.length_penalty);
    r.get("max_length", m.beam.max_length);
    if (auto* v = r.find("sweep_ks")) m.sweep_ks = number_list<std::size_t>(*v, r.at("sweep_ks"));
    r.get("dialog_positions", m.dialog_positions);
    r.get("dialog_top_m", m.dialog_top_m);
  });

  root.object("analyze", [&](Reader& r) {
    auto& a = c.analyze;
    r.get("grid_points", a.grid.points);
    r.get("grid_lo", a.grid.lo);
    r.get("grid_hi", a.grid.hi);
    read_mixture(r, "learner", a.grid.learner);
    read_mixture(r, "teacher", a.grid.teacher);
    r.get("lagrangian_teachers", a.lagrangian_teachers);
    r.get("lagrangian_min_dim", a.lagrangian_min_dim);
    r.get("lagrangian_max_dim", a.lagrangian_max_dim);
    r.get("property_samples", a.property_samples);
    r.get("soft_q_instances", a.soft_q_instances);
    r.get("soft_q_dim", a.soft_q_dim);
  });

  root.finish();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  check("$.toy", [&] {
    auto t = toy.base;
    t.validate();
  });
  if (toy.seeds < 1) Reader::fail("$.toy.seeds", "must be >= 1");
  check("$.corpus", [&] { corpus.validate(); });
  if (transfer.pairs < 10) Reader::fail("$.corpus.pairs", "must be >= 10");
  if (teacher.kind != "oracle" && teacher.kind != "model") {
    Reader::fail("$.teacher.kind", "expected \"oracle\" or \"model\"");
  }
  if (!(teacher.smoothing >= 0.0 && teacher.smoothing < 1.0)) {
    Reader::fail("$.teacher.smoothing", "must lie in [0,1)");
  }
  if (teacher.hidden < 1) Reader::fail("$.teacher.hidden", "must be >= 1");
  if (teacher.epochs < 0) Reader::fail("$.teacher.epochs", "must be >= 0");
  if (!(teacher.learning_rate > 0.0)) Reader::fail("$.teacher.learning_rate", "must be > 0");
  if (learner.hidden < 1) Reader::fail("$.learner.hidden", "must be >= 1");
  check("$.train", [&] { train.validate(); });
  if (transfer.checkpoint_every < 0) Reader::fail("$.train.checkpoint_every", "must be >= 0");
  if (transfer.seeds < 1) Reader::fail("$.transfer.seeds", "must be >= 1");
  check("$.metrics", [&] { metrics.beam.validate(); });
  if (metrics.probe_k < 1) Reader::fail("$.metrics.probe_k", "must be >= 1");
  if (metrics.dialog_top_m < 1) Reader::fail("$.metrics.dialog_top_m", "must be >= 1");
  for (auto k : metrics.sweep_ks) {
    if (k < 1) Reader::fail("$.metrics.sweep_ks", "entries must be >= 1");
  }
  check("$.analyze", [&] { analysis::discretize(analyze.grid); });
  if (analyze.lagrangian_teachers < 1) Reader::fail("$.analyze.lagrangian_teachers", "must be >= 1");
  if (analyze.lagrangian_min_dim < 2 || analyze.lagrangian_max_dim < analyze.lagrangian_min_dim) {
    Reader::fail("$.analyze.lagrangian_min_dim", "need 2 <= min_dim <= max_dim");
  }
  if (analyze.property_samples < 1) Reader::fail("$.analyze.property_samples", "must be >= 1");
  if (analyze.soft_q_instances < 1) Reader::fail("$.analyze.soft_q_instances", "must be >= 1");
  if (analyze.soft_q_dim < 1) Reader::fail("$.analyze.soft_q_dim", "must be >= 1");
}

json ExperimentConfig::to_json() const {
  const auto& t = toy.base;
  json modes = json::array();
  for (const auto& m : transfer.modes) modes.push_back(m.name());
  json topk = nullptr;
  if (train.topk) topk = {{"k", train.topk->k}, {"form", form_name(train.topk->form)}};
  return {
      {"schema_version", schema_version},
      {"seed", seed},
      {"output_dir", output_dir.string()},
      {"workers", workers},
      {"toy",
       {{"teacher", std::vector<double>(t.teacher.probs().begin(), t.teacher.probs().end())},
        {"k", t.k},
        {"form", form_name(t.form)},
        {"learning_rate", t.learning_rate},
        {"epochs", t.epochs},
        {"init", t.init == toy::InitKind::Uniform ? "uniform" : "random"},
        {"init_scale", t.init_scale},
        {"seeds", toy.seeds}}},
      {"corpus",
       {{"source_tokens", corpus.source_tokens},
        {"groups", corpus.groups},
        {"min_group_size", corpus.min_group_size},
        {"max_group_size", corpus.max_group_size},
        {"emission_skew", corpus.emission_skew},
        {"min_length", corpus.min_length},
        {"max_length", corpus.max_length},
        {"noise", corpus.noise},
        {"pairs", transfer.pairs}}},
      {"teacher",
       {{"kind", teacher.kind},
        {"smoothing", teacher.smoothing},
        {"hidden", teacher.hidden},
        {"epochs", teacher.epochs},
        {"learning_rate", teacher.learning_rate}}},
      {"learner", {{"hidden", learner.hidden}, {"init_scale", learner.init_scale}}},
      {"train",
       {{"lambda", train.lambda},
        {"learning_rate", train.learning_rate},
        {"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"pretrain_epochs", train.pretrain_epochs},
        {"checkpoint_every", transfer.checkpoint_every},
        {"adam",
         {{"beta0", train.adam.beta0}, {"beta1", train.adam.beta1}, {"epsilon", train.adam.epsilon}}},
        {"topk", topk}}},
      {"transfer", {{"modes", modes}, {"seeds", transfer.seeds}}},
      {"metrics",
       {{"probes", metrics.probes},
        {"probe_k", metrics.probe_k},
        {"beam_size", metrics.beam.beam_size},
        {"length_penalty", metrics.beam.length_penalty},
        {"max_length", metrics.beam.max_length},
        {"sweep_ks", metrics.sweep_ks},
        {"dialog_positions", metrics.dialog_positions},
        {"dialog_top_m", metrics.dialog_top_m}}},
      {"analyze",
       {{"grid_points", analyze.grid.points},
        {"grid_lo", analyze.grid.lo},
        {"grid_hi", analyze.grid.hi},
        {"learner", mixture_json(analyze.grid.learner)},
        {"teacher", mixture_json(analyze.grid.teacher)},
        {"lagrangian_teachers", analyze.lagrangian_teachers},
        {"lagrangian_min_dim", analyze.lagrangian_min_dim},
        {"lagrangian_max_dim", analyze.lagrangian_max_dim},
        {"property_samples", analyze.property_samples},
        {"soft_q_instances", analyze.soft_q_instances},
        {"soft_q_dim", analyze.soft_q_dim}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ktlab::cli
