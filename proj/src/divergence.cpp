#include "ktlab/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ktlab/error.hpp"

namespace ktlab {

DivergenceMode DivergenceMode::jsd(double backward_weight) {
  if (!(backward_weight >= 0.0 && backward_weight <= 1.0)) {
    throw InvalidArgument("jsd weight must lie in [0,1], got " + std::to_string(backward_weight));
  }
  return DivergenceMode(Kind::Jsd, backward_weight);
}

std::string DivergenceMode::name() const {
  switch (kind_) {
    case Kind::Forward:
      return "forward";
    case Kind::Backward:
      return "backward";
    case Kind::Jsd:
      break;
  }
  if (weight_ == 0.5) return "jsd";
  std::string w = std::to_string(weight_);
  while (w.size() > 1 && w.back() == '0') w.pop_back();
  return "jsd:" + w;
}

DivergenceMode DivergenceMode::parse(const std::string& text) {
  if (text == "forward" || text == "kd") return forward();
  if (text == "backward" || text == "ka") return backward();
  if (text == "jsd") return jsd(0.5);
  if (text.rfind("jsd:", 0) == 0) {
    std::size_t used = 0;
    double w = 0.0;
    try {
      w = std::stod(text.substr(4), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - 4) {
      throw InvalidArgument("bad jsd weight in mode '" + text + "'");
    }
    return jsd(w);
  }
  throw InvalidArgument("unknown divergence mode '" + text +
                        "' (expected forward|backward|jsd|jsd:<w>|kd|ka)");
}

namespace {

void require_same_support(const Categorical& p, const Categorical& q) {
  if (p.size() != q.size()) {
    throw InvalidArgument("support mismatch: learner has " + std::to_string(p.size()) +
                          " entries, teacher has " + std::to_string(q.size()));
  }
}

// log(a / b) for a, b > 0, accurate when a and b are close.
double log_ratio(double a, double b) {
  // log1p is only better conditioned near a = b; far from it, it loses digits near -1.
  const double r = a / b;
  return (r > 0.5 && r < 2.0) ? std::log1p((a - b) / b) : std::log(r);
}

// q log(q/p); zero when q = 0.
double forward_term(double p, double q, std::size_t i) {
  if (q == 0.0) return 0.0;
  if (p == 0.0) throw ZeroProbability("forward KL needs learner > 0 where teacher > 0", i);
  return q * log_ratio(q, p);
}

// p log(p/q); zero when p = 0.
double backward_term(double p, double q, std::size_t i) {
  if (p == 0.0) return 0.0;
  if (q == 0.0) throw ZeroProbability("backward KL needs teacher > 0 where learner > 0", i);
  return p * log_ratio(p, q);
}

// b * phi(a / b) with phi(z) = z log z - z + 1, the Lagrange-completed KL term.
double completed_term(double a, double b) {
  if (a == 0.0) return b;
  const double u = (a - b) / b;
  const double phi = (1.0 + u) * std::log1p(u) - u;
  return b * std::max(phi, 0.0);
}

double mixed_term(double p, double q, std::size_t i, DivergenceMode mode, TruncatedForm form) {
  double total = 0.0;
  if (mode.forward_weight() > 0.0) {
    double t = forward_term(p, q, i);
    if (form == TruncatedForm::Relaxed) t = completed_term(q, p);
    total += mode.forward_weight() * t;
  }
  if (mode.backward_weight() > 0.0) {
    double t = backward_term(p, q, i);
    if (form == TruncatedForm::Relaxed) t = completed_term(p, q);
    total += mode.backward_weight() * t;
  }
  return total;
}

}  // namespace

double divergence(const Categorical& learner, const Categorical& teacher, DivergenceMode mode) {
  require_same_support(learner, teacher);
  double fwd = 0.0;
  double bwd = 0.0;
  for (std::size_t i = 0; i < learner.size(); ++i) {
    if (mode.forward_weight() > 0.0) fwd += forward_term(learner[i], teacher[i], i);
    if (mode.backward_weight() > 0.0) bwd += backward_term(learner[i], teacher[i], i);
  }
  return mode.forward_weight() * std::max(fwd, 0.0) + mode.backward_weight() * std::max(bwd, 0.0);
}

double truncated_divergence(const Categorical& learner, const Categorical& teacher,
                            const TruncationSpec& trunc, DivergenceMode mode) {
  require_same_support(learner, teacher);
  if (trunc.k == learner.size()) return divergence(learner, teacher, mode);
  double total = 0.0;
  for (std::size_t i : top_k_indices(learner.probs(), trunc.k)) {
    total += mixed_term(learner[i], teacher[i], i, mode, trunc.form);
  }
  return total;
}

std::vector<double> grad_wrt_p(const Categorical& learner, const Categorical& teacher,
                               DivergenceMode mode) {
  require_same_support(learner, teacher);
  std::vector<double> g(learner.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double p = learner[i];
    const double q = teacher[i];
    if (p <= 0.0) throw ZeroProbability("gradient needs strictly positive learner", i);
    if (q <= 0.0) throw ZeroProbability("gradient needs strictly positive teacher", i);
    const double g_forward = (p - q) / p;       // 1 - q/p
    const double g_backward = log_ratio(p, q);  // log p/q
    g[i] = mode.forward_weight() * g_forward + mode.backward_weight() * g_backward;
  }
  return g;
}

std::vector<double> grad_wrt_logits(const Logits& logits, const Categorical& teacher,
                                    DivergenceMode mode,
                                    const std::optional<TruncationSpec>& trunc) {
  const std::size_t n = logits.size();
  if (n != teacher.size()) {
    throw InvalidArgument("support mismatch: logits have " + std::to_string(n) +
                          " entries, teacher has " + std::to_string(teacher.size()));
  }
  const Categorical learner = softmax(logits);
  const double lse = log_sum_exp(logits.values());
  const double wf = mode.forward_weight();
  const double wb = mode.backward_weight();

  std::vector<double> log_q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (teacher[i] > 0.0) {
      log_q[i] = std::log(teacher[i]);
    } else if (wb > 0.0) {
      throw ZeroProbability("backward KL needs teacher > 0 where learner > 0", i);
    }
  }

  std::vector<double> dz(n, 0.0);
  if (!trunc || trunc->k == n) {
    if (trunc && trunc->k == 0) throw InvalidArgument("top-k: k must be >= 1");
    // Forward: d/dz D(q||p) = p - q.  Backward: p_j (log p_j/q_j - D(p||q)).
    double kl_pq = 0.0;
    if (wb > 0.0) {
      for (std::size_t i = 0; i < n; ++i) kl_pq += learner[i] * (logits[i] - lse - log_q[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      double g = 0.0;
      if (wf > 0.0) g += wf * (learner[j] - teacher[j]);
      if (wb > 0.0) g += wb * learner[j] * (logits[j] - lse - log_q[j] - kl_pq);
      dz[j] = g;
    }
    return dz;
  }

  // Truncated: partials w.r.t. p on the kept set, then the softmax Jacobian.
  const auto kept = top_k_indices(learner.probs(), trunc->k);
  const bool relaxed = trunc->form == TruncatedForm::Relaxed;
  std::vector<double> g(n, 0.0);
  double mean = 0.0;
  for (std::size_t i : kept) {
    const double p = learner[i];
    const double q = teacher[i];
    double gi = 0.0;
    if (wf > 0.0) gi += wf * (relaxed ? (p - q) / p : -q / p);
    if (wb > 0.0) {
      const double lr = logits[i] - lse - log_q[i];
      gi += wb * (relaxed ? lr : lr + 1.0);
    }
    g[i] = gi;
    mean += p * gi;
  }
  for (std::size_t j = 0; j < n; ++j) dz[j] = learner[j] * (g[j] - mean);
  return dz;
}

}  // namespace ktlab
