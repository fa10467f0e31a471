#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gpbag/dataset.hpp"
#include "gpbag/kernels.hpp"

namespace gpbag {

struct NoiseSpec {
  double sigma_sq = 0.0;  // observation-noise variance, >= 0
  bool fixed = false;     // true keeps it out of hyperparameter optimization
};

struct Prediction {
  double mean = 0.0;
  // Variance of the latent function by default; observation noise is added
  // only on request (PredictOptions).
  double variance = 0.0;
  bool variance_clipped = false;  // negative numerical variance clipped to zero
};

struct PredictOptions {
  bool include_observation_noise = false;
};

// One exact GP conditioned on a (typically small) training set. Holds the
// lower Cholesky factor of K + (sigma_n^2 + jitter) I and the solved weights
// alpha, so prediction and the marginal likelihood need no further
// factorization.
struct GPModel {
  Dataset train;
  KernelSpec kernel;  // bound
  NoiseSpec noise;
  Eigen::MatrixXd chol_lower;
  Eigen::VectorXd alpha;
  double jitter = 0.0;  // diagonal addition that made the factorization succeed
};

// Factorizes with an escalating jitter ladder: start at 1e-8 * mean(diag),
// multiply by 10 on failure, give up past 1e-2 * mean(diag) with a
// NumericalError listing each attempted value.
GPModel fit_exact(const Dataset& data, const KernelSpec& kernel, const NoiseSpec& noise = {});

std::vector<Prediction> predict(const GPModel& model, const Eigen::MatrixXd& X_star,
                                const PredictOptions& options = {});

double log_marginal_likelihood(const GPModel& model);

// d(log marginal likelihood)/d(log theta) via the standard trace identity,
// for every free kernel hyperparameter followed by log sigma_n^2 when the
// noise is free. Order matches gradient_param_names().
Eigen::VectorXd lml_gradient(const GPModel& model);
std::vector<std::string> gradient_param_names(const GPModel& model);

}  // namespace gpbag
