#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gpbag/dataset.hpp"
#include "gpbag/kernels.hpp"
#include "gpbag/optimize.hpp"

namespace gpbag {

enum class SizingMethod { EmpiricalFormula, ProportionInference, Explicit };

const char* sizing_method_name(SizingMethod method);

struct ProbePoint {
  double delta = 0.0;
  std::size_t subset_size = 0;  // probe-train rows used at this delta
  double rmse = 0.0;
};

struct SizingPlan {
  SizingMethod method = SizingMethod::EmpiricalFormula;
  std::size_t dataset_size = 0;
  double epsilon = 0.0;
  double c = 1.0;                  // formula constant (1 low-noise, 0.5 noisy)
  double delta = 0.0;              // requested/derived exponent
  std::size_t subset_size = 0;     // the answer: rows per ensemble member
  double effective_delta = 0.0;    // log(subset_size) / log(N)
  bool target_met = true;          // probe reached epsilon (or not applicable)
  bool full_data_fallback = false; // dataset too small for the formula
  std::vector<ProbePoint> trace;   // probe history, in evaluation order
};

// Empirical subset size: ceil(N^delta / (c * epsilon^(1/10))) with
// delta = 1 / ln(ln N), clamped to [8, N]. Datasets with fewer than 16 rows
// fall back to the full data (full_data_fallback set). Requires epsilon > 0
// and c > 0.
SizingPlan size_by_formula(std::size_t n, double epsilon, double c = 1.0);

struct ProbeConfig {
  std::size_t sample_size = 2000;  // probe rows (capped at the dataset size)
  double train_fraction = 0.7;
  double grid_start = 0.1;
  double grid_step = 0.05;
  double delta_max = 1.0;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
};

// Subset-proportion inference. Draws a probe sample without replacement,
// splits it 70/30, then walks delta up the grid fitting a single GP on a
// ceil(M^delta)-row subsample of the probe-train part (M = probe-train size)
// until the probe-test RMSE reaches epsilon. Returns the first qualifying
// delta with subset_size = ceil(N^delta); if none qualifies, returns
// delta_max with target_met = false. Every probe fit lands in the trace.
SizingPlan infer_delta(const Dataset& data, double epsilon, const KernelSpec& kernel_template,
                       const ProbeConfig& probe);

// Explicit choices, normalized into the same plan shape.
SizingPlan plan_from_delta(std::size_t n, double delta);
SizingPlan plan_from_size(std::size_t n, std::size_t subset_size);

}  // namespace gpbag
