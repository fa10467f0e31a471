#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gpbag/gp.hpp"
#include "gpbag/optimize.hpp"

namespace gpbag {

enum class Combination { Average, ProductOfExperts };

const char* combination_name(Combination combination);
Combination combination_from_name(const std::string& name);

struct EnsembleConfig {
  int estimators = 30;          // K
  std::size_t subset_size = 0;  // rows per member; must be in [1, N]
  bool with_replacement = true;
  Combination combination = Combination::Average;
  bool standardize = true;      // fit on standardized copies of the data
  std::uint64_t seed = 0;
  int workers = 0;              // 0 = hardware concurrency; never affects results
};

// K exact GPs, each fit on its own bootstrap subset. `scaler` maps original
// units into the space the members were trained in (composing any transform
// already recorded on the training data), so predictions come back in
// original units. The covariance of the combined estimator is the uniform
// mixture of the member kernels (see mixture_gram).
struct EnsembleModel {
  EnsembleConfig config;
  Standardizer scaler;
  std::string kernel_text;  // structural spec; archives round-trip through it
  std::vector<GPModel> members;  // member i fit on the i-th drawn subset
};

// Draws K subsets, fits each member by marginal-likelihood optimization, and
// returns the assembled model. Member subsets and fits depend only on
// config.seed and the member index, so any worker count gives bitwise
// identical results. A member whose fit fails unrecoverably raises a
// NumericalError naming the member index.
EnsembleModel fit_ensemble(const Dataset& data, const KernelSpec& kernel_template,
                           const EnsembleConfig& config, const OptimizerConfig& optimizer = {},
                           std::optional<NoiseSpec> noise = {});

// Uniform model averaging: mean (1/K) sum mu_i, variance (1/K^2) sum var_i.
Prediction combine_average(const std::vector<Prediction>& members);

// Product of experts: precisions add. Member variances are floored at 1e-12
// before inversion; the normalizing constant of the product density is never
// needed and never formed.
Prediction combine_poe(const std::vector<Prediction>& members);

// Member predictions combined per the model's configured rule (or an
// explicit override), de-standardized into original units. Evaluation is
// chunked and parallelized across rows of X_star without affecting results.
std::vector<Prediction> predict_ensemble(const EnsembleModel& model,
                                         const Eigen::MatrixXd& X_star,
                                         const PredictOptions& options = {});
std::vector<Prediction> predict_ensemble(const EnsembleModel& model,
                                         const Eigen::MatrixXd& X_star,
                                         Combination combination,
                                         const PredictOptions& options = {});

// (1/K) sum of the member kernels' Gram matrices on X (model units). The
// uniform mixture of valid kernels is itself a valid kernel.
Eigen::MatrixXd mixture_gram(const EnsembleModel& model, const Eigen::MatrixXd& X);

// The subset index draws fit_ensemble would make for this configuration.
std::vector<std::vector<std::size_t>> member_draws(std::size_t n, const EnsembleConfig& config);

// Versioned JSON archive: config, kernel text, scaler, and per-member
// training subset plus fitted log-parameters. Cholesky factors are not
// stored; members are re-factorized on load.
void save_model(const EnsembleModel& model, const std::filesystem::path& path);
EnsembleModel load_model(const std::filesystem::path& path);

}  // namespace gpbag
