#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gpbag/gp.hpp"

namespace gpbag {

struct OptimizerConfig {
  int restarts = 3;             // additional perturbed starts beyond the heuristic one
  int max_iterations = 200;
  double grad_tolerance = 1e-5;  // on the projected gradient 2-norm
  double log_lower_bound = -10.0;
  double log_upper_bound = 10.0;
  std::uint64_t seed = 0;       // drives restart perturbations
};

// Objective callback for maximize(): returns f(x) and, when `gradient` is
// non-null, writes df/dx into it. May return -inf to reject a point.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;   // projected gradient norm at the final point
  bool converged = false;
  std::vector<double> trace;  // objective at every accepted iterate; non-decreasing
};

// Box-constrained L-BFGS ascent with a backtracking line search. Every
// accepted step strictly improves the objective, so the trace is monotone.
// Falls back to steepest ascent when the quasi-Newton direction is unusable.
OptimizeResult maximize(const Objective& objective, const Eigen::VectorXd& x0,
                        const OptimizerConfig& config);

// Fits kernel hyperparameters (and the noise variance unless fixed) by
// maximizing the log marginal likelihood in log-parameter space.
//
// The heuristic start sets every variance to var(y), lengthscales to the
// per-column standard deviation of X, periods to the mean column spread, and
// sigma_n^2 to 0.1 * var(y). Each restart perturbs the heuristic start by
// uniform +-1 in log space using a seed derived from (config.seed, restart).
// The template's own hyperparameters are also evaluated as a candidate, so
// the returned model never scores below the template as given. Ties within
// 1e-9 go to the lowest restart index; restarts run sequentially, so results
// are reproducible.
//
// When `noise` is not provided, a free noise of 0.1 * var(y) is assumed.
GPModel fit_gp(const Dataset& data, const KernelSpec& kernel_template,
               const OptimizerConfig& config = {}, std::optional<NoiseSpec> noise = {});

}  // namespace gpbag
