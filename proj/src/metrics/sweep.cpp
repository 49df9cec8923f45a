#include "ktlab/metrics/sweep.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "ktlab/error.hpp"
#include "ktlab/io.hpp"

namespace ktlab::metrics {

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  const unsigned w = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), n));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < w; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<SweepRow> topk_accuracy_sweep(const seq::ModelParams& learner,
                                          const train::TeacherEvaluator& teacher,
                                          const seq::Corpus& corpus, std::span<const std::size_t> ks,
                                          const train::TrainConfig& cfg,
                                          const train::EvalConfig& eval, unsigned workers) {
  const auto V = static_cast<std::size_t>(learner.dims().target_vocab);
  for (auto k : ks) {
    if (k < 1 || k > V) {
      throw InvalidArgument("sweep: k=" + std::to_string(k) + " outside [1, " + std::to_string(V) + "]");
    }
  }
  train::EvalConfig ev = eval;
  ev.decode_validation = true;
  std::vector<SweepRow> rows(ks.size());
  parallel_for(ks.size(), workers, [&](std::size_t i) {
    train::TrainConfig c = cfg;
    c.topk = TruncationSpec{ks[i], cfg.topk ? cfg.topk->form : TruncatedForm::Relaxed};
    const auto res = train::finetune(learner, teacher, corpus, c, ev);
    rows[i] = {ks[i], cfg.mode.name(), res.log.epochs.back().validation_score};
  });
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "k,mode,score\n";
  for (const auto& r : rows) out += std::to_string(r.k) + "," + r.mode + "," + format_double(r.score) + "\n";
  return out;
}

}  // namespace ktlab::metrics
