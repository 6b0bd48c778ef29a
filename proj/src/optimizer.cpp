#include "mrforest/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "mrforest/error.hpp"

namespace mrf {

void validate(const OptimizerConfig& config) {
  if (config.max_iters < 1) fail(ErrorCode::invalid_argument, "optimizer: max_iters must be >= 1");
  if (!(config.grad_tolerance > 0.0)) {
    fail(ErrorCode::invalid_argument, "optimizer: grad_tolerance must be > 0");
  }
  if (!(config.armijo > 0.0 && config.armijo < 1.0)) {
    fail(ErrorCode::invalid_argument, "optimizer: armijo constant must be in (0,1)");
  }
  if (!(config.curvature > config.armijo && config.curvature < 1.0)) {
    fail(ErrorCode::invalid_argument, "optimizer: curvature constant must be in (armijo,1)");
  }
  if (config.max_line_evals < 1) fail(ErrorCode::invalid_argument, "optimizer: max_line_evals must be >= 1");
}

namespace {

/// f at x, or NaN when the evaluation overflowed.
double try_eval(const Objective& f, const ParameterVector& x, ParameterVector& g, int& evals) {
  ++evals;
  try {
    const double v = f(x, g);
    if (!std::isfinite(v) || !g.allFinite()) return std::nan("");
    return v;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::numerical_error) throw;
    return std::nan("");
  }
}

struct Probe {
  double a = 0.0;
  double f = 0.0;   // NaN: evaluation failed
  double df = 0.0;  // directional derivative
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const OptimizerConfig& config, const ParameterVector& x, const ParameterVector& d,
             double f0, double slope, int& evals)
      : f_(f), config_(config), x_(x), d_(d), f0_(f0), slope_(slope), noise_(1e-12 * std::abs(f0)), evals_(evals) {}

  /// Strong Wolfe step from the initial guess `a`; false when no point with
  /// sufficient decrease was found within the evaluation budget.
  bool run(double a) {
    Probe lo{0.0, f0_, slope_}, hi;
    bool bracketed = false;
    while (used_ < config_.max_line_evals) {
      const Probe p = probe(a);
      if (std::isnan(p.f) || !decrease(p) || (lo.a > 0.0 && p.f > lo.f + noise_)) {
        hi = p;
        bracketed = true;
        break;
      }
      if (std::abs(p.df) <= -config_.curvature * slope_) return accept();
      if (p.df >= 0.0) {
        hi = lo;
        lo = p;
        bracketed = true;
        break;
      }
      lo = p;
      a *= 2.0;
    }
    while (bracketed && used_ < config_.max_line_evals) {
      const double da = hi.a - lo.a;
      double t = 0.5 * da;
      if (!std::isnan(hi.f) && std::abs(hi.f - lo.f) > noise_) {
        const double curv = hi.f - lo.f - lo.df * da;
        if (curv > 0.0) t = -lo.df * da * da / (2.0 * curv);
      } else if (!std::isnan(hi.f) && hi.df != lo.df) {
        t = -lo.df * da / (hi.df - lo.df);  // values are rounding noise: secant on the derivative
      }
      // keep the trial away from both ends of the bracket
      const double lim = 0.1 * std::abs(da);
      t = da > 0.0 ? std::clamp(t, lim, da - lim) : std::clamp(t, da + lim, -lim);
      const Probe p = probe(lo.a + t);
      if (std::isnan(p.f) || !decrease(p) || p.f > lo.f + noise_) {
        hi = p;
        continue;
      }
      if (std::abs(p.df) <= -config_.curvature * slope_) return accept();
      if (p.df * (hi.a - lo.a) >= 0.0) hi = lo;
      lo = p;
    }
    if (!has_best_) return false;
    alpha = best_a_;
    value = best_f_;
    x_out = std::move(best_x_);
    g_out = std::move(best_g_);
    return true;
  }

  double alpha = 0.0;
  double value = 0.0;
  ParameterVector x_out, g_out;

 private:
  Probe probe(double a) {
    ++used_;
    x_trial_ = x_ + a * d_;
    const double v = try_eval(f_, x_trial_, g_trial_, evals_);
    Probe p{a, v, std::isnan(v) ? 0.0 : g_trial_.dot(d_)};
    if (!std::isnan(v) && armijo(p) && (!has_best_ || v < best_f_)) {
      has_best_ = true;
      best_a_ = a;
      best_f_ = v;
      best_x_ = x_trial_;
      best_g_ = g_trial_;
    }
    last_ = p;
    return p;
  }

  bool armijo(const Probe& p) const { return p.f <= f0_ + config_.armijo * p.a * slope_; }

  // Near a minimizer the decrease is below rounding error in f; within that
  // band the curvature test on the derivative alone decides.
  bool decrease(const Probe& p) const { return armijo(p) || p.f <= f0_ + noise_; }

  bool accept() {
    alpha = last_.a;
    value = last_.f;
    x_out = std::move(x_trial_);
    g_out = std::move(g_trial_);
    return true;
  }

  const Objective& f_;
  const OptimizerConfig& config_;
  const ParameterVector& x_;
  const ParameterVector& d_;
  double f0_, slope_, noise_;
  int& evals_;
  int used_ = 0;
  Probe last_;
  ParameterVector x_trial_, g_trial_;
  bool has_best_ = false;
  double best_a_ = 0.0, best_f_ = 0.0;
  ParameterVector best_x_, best_g_;
};

}  // namespace

OptimizerResult minimize_cg(const Objective& f, ParameterVector x0, const OptimizerConfig& config,
                            OptimizerState* state,
                            const std::function<void(const IterationLog&)>& on_iteration) {
  validate(config);
  OptimizerResult res;
  res.x = std::move(x0);
  res.gradient = ParameterVector::Zero(res.x.size());
  res.value = f(res.x, res.gradient);
  ++res.evaluations;
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    fail(ErrorCode::numerical_error, "optimizer: non-finite objective at the starting point");
  }
  double gnorm = res.gradient.norm();
  res.log.push_back({0, res.value, gnorm, 0.0});
  if (gnorm <= config.grad_tolerance) {
    res.converged = true;
    return res;
  }

  ParameterVector d = -res.gradient;
  double prev_slope = 0.0;
  double step = state && state->last_step > 0.0 ? state->last_step : 1.0 / d.norm();
  for (int k = 1; k <= config.max_iters; ++k) {
    double slope = res.gradient.dot(d);
    if (!(slope < 0.0)) {
      d = -res.gradient;
      slope = -gnorm * gnorm;
    }
    if (k > 1 && prev_slope < 0.0) step = std::min(step * prev_slope / slope, 1e10);

    LineSearch ls(f, config, res.x, d, res.value, slope, res.evaluations);
    if (!ls.run(step)) {
      res.line_search_failed = true;
      break;
    }
    const ParameterVector g_old = res.gradient;
    res.x = std::move(ls.x_out);
    res.value = ls.value;
    res.gradient = std::move(ls.g_out);
    res.iterations = k;
    gnorm = res.gradient.norm();
    step = ls.alpha;
    prev_slope = slope;
    if (state) state->last_step = ls.alpha;
    const IterationLog entry{k, res.value, gnorm, ls.alpha};
    res.log.push_back(entry);
    if (on_iteration) on_iteration(entry);
    if (gnorm <= config.grad_tolerance) {
      res.converged = true;
      break;
    }
    const double denom = g_old.squaredNorm();
    const double pr = denom > 0.0 ? std::max(0.0, res.gradient.dot(res.gradient - g_old) / denom) : 0.0;
    d = -res.gradient + pr * d;
  }
  return res;
}

}  // namespace mrf
