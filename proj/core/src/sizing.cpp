#include "gpbag/sizing.hpp"

#include <algorithm>
#include <cmath>

#include "gpbag/gp.hpp"
#include "gpbag/rng.hpp"

namespace gpbag {

namespace {

constexpr std::size_t formula_floor = 8;
constexpr std::size_t formula_min_n = 16;  // ln(ln N) must clear 1 comfortably

std::size_t ceil_to_size(double value, std::size_t cap) {
  if (value >= static_cast<double>(cap)) return cap;
  const double c = std::ceil(value);
  return c < 1.0 ? std::size_t{1} : static_cast<std::size_t>(c);
}

double effective_delta_for(std::size_t subset_size, std::size_t n) {
  if (n < 2) return 1.0;
  return std::log(static_cast<double>(subset_size)) / std::log(static_cast<double>(n));
}

}  // namespace

const char* sizing_method_name(SizingMethod method) {
  switch (method) {
    case SizingMethod::EmpiricalFormula: return "formula";
    case SizingMethod::ProportionInference: return "probe";
    case SizingMethod::Explicit: return "explicit";
  }
  throw InputError("sizing: unknown method");
}

SizingPlan size_by_formula(std::size_t n, double epsilon, double c) {
  if (n == 0) throw InputError("sizing: dataset size must be positive");
  if (!std::isfinite(epsilon) || epsilon <= 0.0)
    throw InputError("sizing: epsilon must be a positive finite number");
  if (!std::isfinite(c) || c <= 0.0)
    throw InputError("sizing: c must be a positive finite number");

  SizingPlan plan;
  plan.method = SizingMethod::EmpiricalFormula;
  plan.dataset_size = n;
  plan.epsilon = epsilon;
  plan.c = c;

  if (n < formula_min_n) {
    // Too small for the shrinking exponent to make sense; use everything.
    plan.delta = 1.0;
    plan.subset_size = n;
    plan.effective_delta = 1.0;
    plan.full_data_fallback = true;
    return plan;
  }

  const double N = static_cast<double>(n);
  plan.delta = 1.0 / std::log(std::log(N));
  const double raw = std::pow(N, plan.delta) / (c * std::pow(epsilon, 0.1));
  plan.subset_size = std::max(formula_floor, ceil_to_size(raw, n));
  plan.effective_delta = effective_delta_for(plan.subset_size, n);
  return plan;
}

SizingPlan infer_delta(const Dataset& data, double epsilon, const KernelSpec& kernel_template,
                       const ProbeConfig& probe) {
  validate(data);
  if (!std::isfinite(epsilon) || epsilon <= 0.0)
    throw InputError("sizing probe: epsilon must be a positive finite number");
  if (probe.sample_size < 2) throw InputError("sizing probe: sample_size must be at least 2");
  if (!(probe.train_fraction > 0.0 && probe.train_fraction < 1.0))
    throw InputError("sizing probe: train_fraction must be inside (0, 1)");
  if (!(probe.grid_start > 0.0) || !(probe.grid_step > 0.0) ||
      probe.grid_start > probe.delta_max)
    throw InputError("sizing probe: grid must start positive and below delta_max");
  const std::size_t n = static_cast<std::size_t>(data.size());
  if (n < 2) throw InputError("sizing probe: need at least two rows");

  const KernelSpec tmpl =
      kernel_template.bound() ? kernel_template : kernel_template.bound_to(data.dim());

  // Probe sample, split into train/test by draw order (the draw is already a
  // uniform shuffle of the chosen rows).
  const std::size_t m = std::min(probe.sample_size, n);
  auto rng = make_engine(probe.seed, 0);
  const Dataset sample = subset_rows(data, sample_without_replacement(rng, n, m));
  const auto m_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(probe.train_fraction * static_cast<double>(m))), 1,
      m - 1);

  Dataset probe_train;
  probe_train.X = sample.X.topRows(static_cast<Eigen::Index>(m_train));
  probe_train.y = sample.y.head(static_cast<Eigen::Index>(m_train));
  Eigen::MatrixXd test_X = sample.X.bottomRows(static_cast<Eigen::Index>(m - m_train));
  Eigen::VectorXd test_y = sample.y.tail(static_cast<Eigen::Index>(m - m_train));

  SizingPlan plan;
  plan.method = SizingMethod::ProportionInference;
  plan.dataset_size = n;
  plan.epsilon = epsilon;
  plan.target_met = false;

  const double M = static_cast<double>(m_train);
  double chosen = probe.delta_max;
  for (int step = 0;; ++step) {
    double delta = probe.grid_start + static_cast<double>(step) * probe.grid_step;
    if (delta > probe.delta_max + 1e-9) break;
    delta = std::min(delta, probe.delta_max);

    const std::size_t rows = ceil_to_size(std::pow(M, delta), m_train);
    auto sub_rng = make_engine(probe.seed, static_cast<std::uint64_t>(step) + 1);
    const Dataset sub = subset_rows(probe_train, sample_without_replacement(sub_rng, m_train, rows));

    // Mirror the main pipeline: fit in standardized space, score in data units.
    const Standardizer sc = Standardizer::fit(sub.X, sub.y);
    Dataset model_data;
    model_data.X = sc.apply_x(sub.X);
    model_data.y = sc.apply_y(sub.y);
    OptimizerConfig opt = probe.optimizer;
    opt.seed = derive_seed(probe.seed, 10000 + static_cast<std::uint64_t>(step));
    const GPModel gp = fit_gp(model_data, tmpl, opt);

    const auto preds = predict(gp, sc.apply_x(test_X));
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double diff = sc.restore_mean(preds[i].mean) - test_y(static_cast<Eigen::Index>(i));
      sq_sum += diff * diff;
    }
    const double rmse = std::sqrt(sq_sum / static_cast<double>(preds.size()));

    plan.trace.push_back({delta, rows, rmse});
    if (rmse <= epsilon) {
      chosen = delta;
      plan.target_met = true;
      break;
    }
  }

  plan.delta = chosen;
  plan.subset_size = ceil_to_size(std::pow(static_cast<double>(n), chosen), n);
  plan.effective_delta = effective_delta_for(plan.subset_size, n);
  return plan;
}

SizingPlan plan_from_delta(std::size_t n, double delta) {
  if (n == 0) throw InputError("sizing: dataset size must be positive");
  if (!std::isfinite(delta) || delta <= 0.0 || delta > 1.0)
    throw InputError("sizing: delta must be inside (0, 1]");
  SizingPlan plan;
  plan.method = SizingMethod::Explicit;
  plan.dataset_size = n;
  plan.delta = delta;
  plan.subset_size = ceil_to_size(std::pow(static_cast<double>(n), delta), n);
  plan.effective_delta = effective_delta_for(plan.subset_size, n);
  return plan;
}

SizingPlan plan_from_size(std::size_t n, std::size_t subset_size) {
  if (n == 0) throw InputError("sizing: dataset size must be positive");
  if (subset_size < 1 || subset_size > n)
    throw InputError("sizing: subset size must be between 1 and the dataset size");
  SizingPlan plan;
  plan.method = SizingMethod::Explicit;
  plan.dataset_size = n;
  plan.subset_size = subset_size;
  plan.delta = effective_delta_for(subset_size, n);
  plan.effective_delta = plan.delta;
  return plan;
}

}  // namespace gpbag
