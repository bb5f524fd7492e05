#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lamd/autodiff.hpp"
#include "lamd/error.hpp"
#include "lamd/tensor.hpp"

namespace lamd {

enum class OptimizerKind { lbfgs, sgd, adam };

inline const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::lbfgs: return "lbfgs";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "lbfgs") return OptimizerKind::lbfgs;
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::lbfgs;
  std::size_t max_iters = 100;
  std::size_t lbfgs_history = 10;
  // Backtracking Armijo: sufficient-decrease constant, step halving, at most
  // this many halvings per line search.
  double armijo_c = 1e-4;
  std::size_t max_halvings = 30;
  double sgd_lr = 1e-2;
  double adam_lr = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_tol = 1e-9;

  void validate() const {
    if (lbfgs_history < 1) throw ConfigError("lbfgs_history must be >= 1");
    if (!(sgd_lr > 0.0) || !(adam_lr > 0.0)) throw ConfigError("learning rates must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
      throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (grad_tol < 0.0) throw ConfigError("grad_tol must be >= 0");
  }
};

/// Builds a scalar objective on `tape` from the variable `x`.
using TapeObjective = std::function<ad::Var(ad::Tape&, ad::Var)>;

struct MinimizeResult {
  Tensor x;
  // trace[0] is the objective at x0; one further entry per accepted iterate.
  std::vector<double> trace;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool stalled = false;    // line search gave up; x is the best point found
  bool converged = false;  // gradient infinity-norm fell below grad_tol

  double final_value() const { return trace.back(); }
};

namespace detail {

struct Evaluation {
  double value;
  std::vector<double> grad;
};

inline Evaluation evaluate(const TapeObjective& f, const Tensor& x) {
  ad::Tape tape;
  ad::Var xv = tape.leaf(x, true);
  ad::Var out = f(tape, xv);
  const double value = out.value().item();
  if (!std::isfinite(value)) throw NumericError("objective is not finite");
  ad::Gradients g = tape.backward(out);
  return {value, g[xv].vec()};
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline MinimizeResult minimize_lbfgs(const TapeObjective& f, Tensor x, const OptimizerConfig& cfg) {
  MinimizeResult res;
  Evaluation cur = evaluate(f, x);
  res.evaluations = 1;
  res.trace.push_back(cur.value);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> history;
  const std::size_t n = x.size();
  std::vector<double> d(n), alpha(cfg.lbfgs_history);

  while (res.iterations < cfg.max_iters) {
    if (inf_norm(cur.grad) < cfg.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion: d = -H g.
    d = cur.grad;
    for (std::size_t i = history.size(); i-- > 0;) {
      alpha[i] = history[i].rho * dot(history[i].s, d);
      for (std::size_t j = 0; j < n; ++j) d[j] -= alpha[i] * history[i].y[j];
    }
    if (!history.empty()) {
      const Pair& last = history.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& v : d) v *= gamma;
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const double beta = history[i].rho * dot(history[i].y, d);
      for (std::size_t j = 0; j < n; ++j) d[j] += (alpha[i] - beta) * history[i].s[j];
    }
    for (double& v : d) v = -v;

    double slope = dot(cur.grad, d);
    if (!(slope < 0.0)) {
      history.clear();
      for (std::size_t j = 0; j < n; ++j) d[j] = -cur.grad[j];
      slope = dot(cur.grad, d);
    }
    // Without curvature information the first step is normalised to unit length.
    double step = history.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(d, d))) : 1.0;

    Tensor trial = x;
    Evaluation next{};
    bool accepted = false;
    for (std::size_t halving = 0; halving <= cfg.max_halvings; ++halving) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = x[j] + step * d[j];
      try {
        next = evaluate(f, trial);
        ++res.evaluations;
        if (next.value <= cur.value + cfg.armijo_c * step * slope) {
          accepted = true;
          break;
        }
      } catch (const NumericError&) {
        ++res.evaluations;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      p.s[j] = trial[j] - x[j];
      p.y[j] = next.grad[j] - cur.grad[j];
    }
    const double sy = dot(p.s, p.y);
    // Armijo alone does not enforce the curvature condition; skip pairs that
    // would make the inverse-Hessian estimate indefinite.
    if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y)) && sy > 0.0) {
      p.rho = 1.0 / sy;
      history.push_back(std::move(p));
      if (history.size() > cfg.lbfgs_history) history.pop_front();
    }
    x = trial;
    cur = std::move(next);
    ++res.iterations;
    res.trace.push_back(cur.value);
  }
  res.x = std::move(x);
  return res;
}

inline MinimizeResult minimize_first_order(const TapeObjective& f, Tensor x, const OptimizerConfig& cfg) {
  MinimizeResult res;
  const bool adam = cfg.kind == OptimizerKind::adam;
  std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0);
  Evaluation cur = evaluate(f, x);
  res.evaluations = 1;
  res.trace.push_back(cur.value);
  while (res.iterations < cfg.max_iters) {
    if (inf_norm(cur.grad) < cfg.grad_tol) {
      res.converged = true;
      break;
    }
    const double t = static_cast<double>(res.iterations + 1);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double g = cur.grad[j];
      if (adam) {
        m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g;
        v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = m[j] / (1.0 - std::pow(cfg.adam_beta1, t));
        const double vhat = v[j] / (1.0 - std::pow(cfg.adam_beta2, t));
        x[j] -= cfg.adam_lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      } else {
        x[j] -= cfg.sgd_lr * g;
      }
    }
    cur = evaluate(f, x);
    ++res.evaluations;
    ++res.iterations;
    res.trace.push_back(cur.value);
  }
  res.x = std::move(x);
  return res;
}

}  // namespace detail

/// Minimises a tape-differentiable scalar objective from x0.
inline MinimizeResult minimize(const TapeObjective& objective, const Tensor& x0, const OptimizerConfig& cfg) {
  cfg.validate();
  if (!x0.all_finite()) throw NumericError("minimize: x0 is not finite");
  if (cfg.kind == OptimizerKind::lbfgs) return detail::minimize_lbfgs(objective, x0, cfg);
  return detail::minimize_first_order(objective, x0, cfg);
}

/// Largest |autodiff - central difference| / max(1, |central difference|)
/// over all coordinates of x.
inline double grad_check(const TapeObjective& f, const Tensor& x, double step) {
  const detail::Evaluation at = detail::evaluate(f, x);
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = detail::evaluate(f, probe).value;
    probe[i] = x[i] - step;
    const double fm = detail::evaluate(f, probe).value;
    probe[i] = x[i];
    const double fd = (fp - fm) / (2.0 * step);
    worst = std::max(worst, std::abs(at.grad[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

/// Adam state for a list of parameter tensors (used by model training).
class AdamState {
 public:
  AdamState(double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Tensor>& params, const std::vector<const Tensor*>& grads) {
    if (m_.empty()) {
      for (const Tensor& p : params) {
        m_.emplace_back(p.shape(), 0.0);
        v_.emplace_back(p.shape(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor& p = params[k];
      const Tensor& g = *grads[k];
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      }
    }
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace lamd
