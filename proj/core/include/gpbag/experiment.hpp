#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gpbag/dataset.hpp"
#include "gpbag/ensemble.hpp"
#include "gpbag/io.hpp"
#include "gpbag/sizing.hpp"

namespace gpbag {

// sin(x)/x with the removable singularity filled in.
double sinc_value(double x);

struct SincSpec {
  std::size_t n = 100000;
  double x_min = -15.0;
  double x_max = 15.0;
  double noise_sd = 0.0;  // additive Gaussian noise on the response
};

// Synthetic 1-D benchmark data: x uniform on [x_min, x_max), y = sinc(x)
// plus optional noise. Deterministic in the seed.
Dataset generate_sinc(const SincSpec& spec, std::uint64_t seed);

// Seeded-shuffle split into a leading train part and trailing test part.
// train_fraction is clamped so both parts keep at least one row.
struct SplitResult {
  Dataset train;
  Dataset test;
};
SplitResult train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed);

struct EvalResult {
  double rmse = 0.0;
  double sd_baseline = 0.0;  // population SD of the truths: the score of
                             // always predicting their mean
};
EvalResult evaluate(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths);

enum class SizingChoice { Formula, Probe, FixedDelta, FixedSize };

// Everything one end-to-end run needs. JSON round-trips through
// config_to_json / config_from_json with the same field names.
struct RunConfig {
  // Data: a delimited file when data_path is set, the sinc generator otherwise.
  std::string data_path;
  char delimiter = ',';
  std::string target;
  std::vector<std::string> features;
  bool standardize = true;
  SincSpec sinc;

  std::string kernel = "rbf";

  SizingChoice sizing = SizingChoice::Formula;
  double epsilon = 0.1;
  double c = 1.0;
  double delta = 0.5;            // FixedDelta
  std::size_t subset_size = 0;   // FixedSize
  std::size_t probe_sample_size = 2000;

  int estimators = 30;
  Combination combination = Combination::Average;
  bool with_replacement = true;
  double train_fraction = 0.7;
  OptimizerConfig optimizer;

  std::uint64_t seed = 0;
  int workers = 0;
  bool evaluate_both_combinations = false;

  // Output paths; empty = skip.
  std::string model_out;
  std::string report_out;        // machine-readable JSON
  std::string report_text_out;   // key = value lines
  std::string predictions_out;   // delimited x, truth, mean, variance
};

struct RunReport {
  std::string status = "ok";  // "ok" | "failed"
  std::string error;          // non-empty when failed
  RunConfig config;

  bool has_data = false;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  Eigen::Index dimensions = 0;
  std::size_t dropped_rows = 0;

  bool has_plan = false;
  SizingPlan plan;

  std::vector<double> member_lml;  // empty until members are fit

  bool has_metrics = false;
  double rmse = 0.0;          // for the configured combination rule
  double sd_baseline = 0.0;
  bool has_both = false;
  double rmse_average = 0.0;  // filled when evaluate_both_combinations
  double rmse_poe = 0.0;

  double sizing_seconds = 0.0;
  double fit_seconds = 0.0;
  double predict_seconds = 0.0;
};

// Loads or generates data, splits, sizes subsets, fits the ensemble,
// evaluates on the held-out part in original units, and writes any requested
// outputs. Failures at any stage produce a report with status "failed" (and
// the report files are still written), never a half-written report.
RunReport run_experiment(const RunConfig& config);

std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);
// Overlays the keys present in `text` onto `base`; unknown keys are errors.
RunConfig config_with_overrides(const RunConfig& base, const std::string& text);

std::string report_to_json(const RunReport& report);
std::string report_to_text(const RunReport& report);

}  // namespace gpbag
