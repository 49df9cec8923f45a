#include "ktlab/toy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ktlab/error.hpp"
#include "ktlab/io.hpp"

namespace ktlab::toy {

void ToyConfig::validate() const {
  if (k < 1 || k > teacher.size()) {
    throw InvalidArgument("toy: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(teacher.size()) + "]");
  }
  if (!(learning_rate > 0.0)) throw InvalidArgument("toy: learning_rate must be > 0");
  if (epochs < 1) throw InvalidArgument("toy: epochs must be >= 1");
  if (init == InitKind::RandomLogits && !(init_scale >= 0.0)) {
    throw InvalidArgument("toy: init_scale must be >= 0");
  }
}

std::string ToyTrace::to_csv() const {
  std::ostringstream out;
  const std::size_t n = records.empty() ? 0 : records.front().p.size();
  out << "epoch";
  for (std::size_t i = 0; i < n; ++i) out << ",p" << i;
  out << ",truncated_loss,full_loss,topk\n";
  for (const auto& r : records) {
    out << r.epoch;
    for (double v : r.p.probs()) out << ',' << format_double(v);
    out << ',' << format_double(r.truncated_loss) << ',' << format_double(r.full_loss) << ',';
    for (std::size_t j = 0; j < r.topk.size(); ++j) out << (j ? ";" : "") << r.topk[j];
    out << '\n';
  }
  return out.str();
}

std::vector<double> initial_logits(const ToyConfig& cfg) {
  std::vector<double> z(cfg.teacher.size(), 0.0);
  if (cfg.init == InitKind::RandomLogits) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : z) v = cfg.init_scale * normal(rng);
  }
  return z;
}

ToyTrace run_toy(const ToyConfig& cfg) {
  cfg.validate();
  const TruncationSpec trunc{cfg.k, cfg.form};
  std::vector<double> z = initial_logits(cfg);
  ToyTrace trace;
  trace.records.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  for (int epoch = 0;; ++epoch) {
    for (double v : z) {
      if (!std::isfinite(v)) {
        throw NumericalError("toy: non-finite logit at epoch " + std::to_string(epoch));
      }
    }
    const Logits logits(z);
    Categorical p = softmax(logits);
    ToyRecord rec;
    rec.epoch = epoch;
    rec.truncated_loss = truncated_divergence(p, cfg.teacher, trunc, cfg.mode);
    rec.full_loss = divergence(p, cfg.teacher, cfg.mode);
    rec.topk = top_k_indices(p.probs(), cfg.k);
    rec.p = std::move(p);
    trace.records.push_back(std::move(rec));
    if (epoch == cfg.epochs) break;

    const auto g = grad_wrt_logits(logits, cfg.teacher, cfg.mode, trunc);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= cfg.learning_rate * g[i];
  }
  return trace;
}

OrderSummary summarize(const ToyTrace& trace, const Categorical& teacher, const std::string& mode,
                       double band) {
  OrderSummary s;
  s.mode = mode;
  const std::size_t n = teacher.size();
  s.first_within_band.assign(n, std::nullopt);
  std::set<std::size_t> previous;
  for (const auto& r : trace.records) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.first_within_band[i] && std::abs(r.p[i] - teacher[i]) <= band) {
        s.first_within_band[i] = r.epoch;
      }
    }
    std::set<std::size_t> current(r.topk.begin(), r.topk.end());
    if (r.epoch > 0 && current != previous) s.topk_changes.push_back(r.epoch);
    previous = std::move(current);
  }
  const auto& last = trace.final();
  s.final_topk = last.topk;
  for (std::size_t i = 0; i < n; ++i) s.final_abs_error.push_back(std::abs(last.p[i] - teacher[i]));
  s.final_truncated_loss = last.truncated_loss;
  return s;
}

OrderComparison compare_orders(const ToyConfig& base) {
  ToyConfig fwd = base;
  fwd.mode = DivergenceMode::forward();
  ToyConfig bwd = base;
  bwd.mode = DivergenceMode::backward();
  OrderComparison c{run_toy(fwd), run_toy(bwd), {}, {}};
  c.forward_summary = summarize(c.forward, base.teacher, "forward");
  c.backward_summary = summarize(c.backward, base.teacher, "backward");
  return c;
}

namespace {

nlohmann::json summary_json(const OrderSummary& s) {
  nlohmann::json band = nlohmann::json::array();
  for (const auto& e : s.first_within_band) band.push_back(e ? nlohmann::json(*e) : nlohmann::json());
  return {{"mode", s.mode},
          {"first_epoch_within_band", band},
          {"topk_change_epochs", s.topk_changes},
          {"final_topk", s.final_topk},
          {"final_abs_error", s.final_abs_error},
          {"final_truncated_loss", s.final_truncated_loss}};
}

}  // namespace

std::string OrderComparison::to_json() const {
  nlohmann::json j = {{"band", kBand},
                      {"forward", summary_json(forward_summary)},
                      {"backward", summary_json(backward_summary)}};
  return j.dump(2) + "\n";
}

}  // namespace ktlab::toy
