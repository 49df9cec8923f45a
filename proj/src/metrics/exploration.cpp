#include "ktlab/metrics/exploration.hpp"

#include <set>

#include "ktlab/error.hpp"
#include "ktlab/io.hpp"

namespace ktlab::metrics {

void TopKHistory::validate() const {
  if (epochs.empty()) throw InvalidArgument("topk history: no epochs");
  for (std::size_t e = 1; e < epochs.size(); ++e) {
    if (epochs[e] <= epochs[e - 1]) throw InvalidArgument("topk history: epochs not increasing");
  }
  for (std::size_t p = 0; p < sets.size(); ++p) {
    if (sets[p].size() != epochs.size()) {
      throw InvalidArgument("topk history: probe " + std::to_string(p) + " has " +
                            std::to_string(sets[p].size()) + " epochs, expected " +
                            std::to_string(epochs.size()));
    }
    for (const auto& s : sets[p]) {
      if (s.size() != k || std::set<seq::TokenId>(s.begin(), s.end()).size() != k) {
        throw InvalidArgument("topk history: probe " + std::to_string(p) + " has a set of size " +
                              std::to_string(s.size()) + " (k=" + std::to_string(k) + ")");
      }
    }
  }
}

TopKHistory history_from_log(const train::MetricsLog& log, std::size_t k) {
  TopKHistory h;
  h.k = k;
  if (log.epochs.empty()) throw InvalidArgument("topk history: empty log");
  const std::size_t probes = log.epochs.front().topk_sets.size();
  h.sets.assign(probes, {});
  for (const auto& m : log.epochs) {
    if (m.topk_sets.size() != probes) throw InvalidArgument("topk history: probe count changed");
    h.epochs.push_back(m.epoch);
    for (std::size_t p = 0; p < probes; ++p) h.sets[p].push_back(m.topk_sets[p]);
  }
  h.validate();
  return h;
}

std::vector<std::size_t> novel_topk_count(const TopKHistory& history) {
  history.validate();
  std::vector<std::size_t> counts(history.epochs.size(), 0);
  for (const auto& probe : history.sets) {
    std::set<seq::TokenId> seen(probe.front().begin(), probe.front().end());
    for (std::size_t e = 1; e < probe.size(); ++e) {
      for (auto tok : probe[e]) {
        if (seen.insert(tok).second) ++counts[e];
      }
    }
  }
  return counts;
}

namespace {

std::string curves_csv(const char* header, std::span<const Curve> curves, bool integral) {
  std::string out = header;
  for (const auto& c : curves) {
    if (c.epochs.size() != c.values.size()) throw InvalidArgument("curve: ragged data");
    for (std::size_t i = 0; i < c.epochs.size(); ++i) {
      out += std::to_string(c.epochs[i]) + "," + c.mode + "," +
             (integral ? std::to_string(static_cast<long long>(c.values[i]))
                       : format_double(c.values[i])) +
             "\n";
    }
  }
  return out;
}

}  // namespace

std::string novel_count_csv(std::span<const Curve> curves) {
  return curves_csv("epoch,mode,novel_count\n", curves, true);
}

std::string entropy_csv(std::span<const Curve> curves) {
  return curves_csv("epoch,mode,entropy\n", curves, false);
}

Curve entropy_curve(const std::string& mode, const train::MetricsLog& log) {
  Curve c{mode, {}, {}};
  for (const auto& m : log.epochs) {
    c.epochs.push_back(m.epoch);
    c.values.push_back(m.mean_position_entropy);
  }
  return c;
}

Curve novel_count_curve(const std::string& mode, const train::MetricsLog& log, std::size_t k) {
  const auto h = history_from_log(log, k);
  const auto counts = novel_topk_count(h);
  Curve c{mode, h.epochs, {}};
  for (auto n : counts) c.values.push_back(static_cast<double>(n));
  return c;
}

}  // namespace ktlab::metrics
