#pragma once

#include <functional>
#include <vector>

#include "mrforest/graph.hpp"

namespace mrf {

struct OptimizerConfig {
  int max_iters = 100;
  double grad_tolerance = 1e-5;  // Euclidean norm of the gradient
  double armijo = 1e-4;     // sufficient decrease
  double curvature = 0.1;   // strong Wolfe: |f'(a)| <= curvature * |f'(0)|
  int max_line_evals = 40;
};

/// Carried between calls so repeated short runs (boosting rounds) start with
/// a sensible step length.
struct OptimizerState {
  double last_step = 0.0;  // 0: unknown
};

struct IterationLog {
  int iteration = 0;
  double objective = 0.0;  // value being minimized
  double grad_norm = 0.0;
  double step = 0.0;
};

struct OptimizerResult {
  ParameterVector x;
  double value = 0.0;
  ParameterVector gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;           // gradient norm reached the tolerance
  bool line_search_failed = false;
  std::vector<IterationLog> log;
};

/// Minimized objective: returns f(x) and writes its gradient. May throw
/// Error(numerical_error); during a line search that rejects the trial step.
using Objective = std::function<double(const ParameterVector& x, ParameterVector& grad)>;

/// Nonlinear conjugate gradient (Polak-Ribiere+, restart on non-descent) with
/// a strong Wolfe line search (bracketing, then interpolating zoom).
OptimizerResult minimize_cg(const Objective& f, ParameterVector x0, const OptimizerConfig& config,
                            OptimizerState* state = nullptr,
                            const std::function<void(const IterationLog&)>& on_iteration = {});

void validate(const OptimizerConfig& config);

}  // namespace mrf
