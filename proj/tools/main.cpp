// Command-line front end: subset sizing, ensemble fitting, prediction from
// saved archives, split-and-score experiments, the sinc benchmark, and a fast
// self-check. Flags mirror the run-config fields; a --config file is applied
// after flag parsing, so keys present in the file win.
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gpbag/gpbag.hpp"
#include "gpbag/version.hpp"

using namespace gpbag;
using nlohmann::json;

namespace {

char parse_delimiter(const std::string& text) {
  if (text == "tab" || text == "\\t") return '\t';
  if (text.size() != 1) throw InputError("delimiter must be a single character (or 'tab')");
  return text[0];
}

SizingChoice sizing_from_name(const std::string& name) {
  if (name == "formula") return SizingChoice::Formula;
  if (name == "probe") return SizingChoice::Probe;
  if (name == "delta") return SizingChoice::FixedDelta;
  if (name == "size") return SizingChoice::FixedSize;
  throw InputError("unknown sizing method '" + name + "' (use formula, probe, delta, or size)");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Mutable flag state shared by the pipeline subcommands, folded into the
// RunConfig after parsing.
struct FlagState {
  std::string delimiter = ",";
  std::string sizing = "formula";
  std::string combination = "average";
  bool no_standardize = false;
  bool no_replacement = false;
  std::string config_path;
};

void add_data_flags(CLI::App* cmd, RunConfig& cfg, FlagState& state) {
  cmd->add_option("--data", cfg.data_path, "Delimited data file (header row required)");
  cmd->add_option("--delimiter", state.delimiter, "Cell delimiter, one character or 'tab'")
      ->capture_default_str();
  cmd->add_option("--target", cfg.target, "Response column name");
  cmd->add_option("--features", cfg.features,
                  "Feature columns, comma separated (default: all non-target)")
      ->delimiter(',');
  cmd->add_flag("--no-standardize", state.no_standardize,
                "Fit in original units instead of standardized ones");
}

void add_sinc_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--n", cfg.sinc.n, "Generated sinc rows (used when --data is absent)")
      ->capture_default_str();
  cmd->add_option("--x-min", cfg.sinc.x_min, "Sinc sample range lower edge")
      ->capture_default_str();
  cmd->add_option("--x-max", cfg.sinc.x_max, "Sinc sample range upper edge")
      ->capture_default_str();
  cmd->add_option("--noise-sd", cfg.sinc.noise_sd, "Additive noise SD on the sinc response")
      ->capture_default_str();
}

void add_sizing_flags(CLI::App* cmd, RunConfig& cfg, FlagState& state) {
  cmd->add_option("--sizing", state.sizing, "Subset sizing: formula, probe, delta, or size")
      ->capture_default_str();
  cmd->add_option("--epsilon", cfg.epsilon, "Target RMSE for formula/probe sizing")
      ->capture_default_str();
  cmd->add_option("--c", cfg.c, "Formula constant (1 low-noise, 0.5 noisy)")
      ->capture_default_str();
  cmd->add_option("--delta", cfg.delta, "Exponent for --sizing delta")->capture_default_str();
  cmd->add_option("--subset-size", cfg.subset_size, "Rows per member for --sizing size");
  cmd->add_option("--probe-sample-size", cfg.probe_sample_size, "Probe sample rows")
      ->capture_default_str();
}

void add_ensemble_flags(CLI::App* cmd, RunConfig& cfg, FlagState& state) {
  cmd->add_option("--kernel", cfg.kernel, "Kernel expression, e.g. 'rbf + linear'")
      ->capture_default_str();
  cmd->add_option("--estimators", cfg.estimators, "Ensemble members (K)")->capture_default_str();
  cmd->add_option("--combination", state.combination, "Combination rule: average or poe")
      ->capture_default_str();
  cmd->add_flag("--no-replacement", state.no_replacement,
                "Draw member subsets without replacement");
  cmd->add_option("--workers", cfg.workers, "Fit/predict threads (0 = hardware)")
      ->capture_default_str();
}

void add_optimizer_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--restarts", cfg.optimizer.restarts, "Perturbed optimizer restarts")
      ->capture_default_str();
  cmd->add_option("--max-iterations", cfg.optimizer.max_iterations, "Optimizer iteration cap")
      ->capture_default_str();
  cmd->add_option("--grad-tolerance", cfg.optimizer.grad_tolerance,
                  "Projected-gradient convergence tolerance")
      ->capture_default_str();
  cmd->add_option("--log-lower-bound", cfg.optimizer.log_lower_bound,
                  "Lower box bound in log-parameter space")
      ->capture_default_str();
  cmd->add_option("--log-upper-bound", cfg.optimizer.log_upper_bound,
                  "Upper box bound in log-parameter space")
      ->capture_default_str();
}

void add_output_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--model-out", cfg.model_out, "Write the fitted model archive here");
  cmd->add_option("--report-out", cfg.report_out, "Write the JSON report here");
  cmd->add_option("--report-text-out", cfg.report_text_out, "Write the key=value report here");
  cmd->add_option("--predictions-out", cfg.predictions_out, "Write test predictions here");
}

void add_config_flag(CLI::App* cmd, FlagState& state) {
  cmd->add_option("--config", state.config_path,
                  "JSON config file; its keys override the flags");
}

// Folds parsed flag state into the config, then overlays the config file.
void finalize_config(RunConfig& cfg, const FlagState& state) {
  cfg.delimiter = parse_delimiter(state.delimiter);
  cfg.sizing = sizing_from_name(state.sizing);
  cfg.combination = combination_from_name(state.combination);
  if (state.no_standardize) cfg.standardize = false;
  if (state.no_replacement) cfg.with_replacement = false;
  if (!state.config_path.empty())
    cfg = config_with_overrides(cfg, read_text_file(state.config_path));
}

json plan_json(const SizingPlan& plan) {
  json j{{"method", sizing_method_name(plan.method)},
         {"dataset_size", plan.dataset_size},
         {"epsilon", plan.epsilon},
         {"c", plan.c},
         {"delta", plan.delta},
         {"subset_size", plan.subset_size},
         {"effective_delta", plan.effective_delta},
         {"target_met", plan.target_met},
         {"full_data_fallback", plan.full_data_fallback}};
  j["trace"] = json::array();
  for (const auto& p : plan.trace)
    j["trace"].push_back(
        {{"delta", p.delta}, {"subset_size", p.subset_size}, {"rmse", p.rmse}});
  return j;
}

void print_plan(const SizingPlan& plan, bool as_json) {
  if (as_json) {
    std::cout << plan_json(plan).dump(2) << "\n";
    return;
  }
  std::cout << "method = " << sizing_method_name(plan.method) << "\n"
            << "dataset_size = " << plan.dataset_size << "\n"
            << "subset_size = " << plan.subset_size << "\n"
            << "delta = " << plan.delta << "\n"
            << "effective_delta = " << plan.effective_delta << "\n"
            << "target_met = " << (plan.target_met ? "true" : "false") << "\n"
            << "full_data_fallback = " << (plan.full_data_fallback ? "true" : "false") << "\n";
  for (std::size_t i = 0; i < plan.trace.size(); ++i)
    std::cout << "probe[" << i << "]: delta=" << plan.trace[i].delta
              << " rows=" << plan.trace[i].subset_size << " rmse=" << plan.trace[i].rmse << "\n";
}

Dataset load_for_config(const RunConfig& cfg, std::size_t* dropped) {
  LoadSpec spec;
  spec.delimiter = cfg.delimiter;
  spec.target = cfg.target;
  spec.features = cfg.features;
  spec.standardize = cfg.standardize;
  LoadResult loaded = load_delimited(cfg.data_path, spec);
  if (dropped) *dropped = loaded.dropped_rows;
  return std::move(loaded.data);
}

SizingPlan plan_for_config(const RunConfig& cfg, const Dataset& data) {
  const std::size_t n = static_cast<std::size_t>(data.size());
  switch (cfg.sizing) {
    case SizingChoice::Formula:
      return size_by_formula(n, cfg.epsilon, cfg.c);
    case SizingChoice::Probe: {
      ProbeConfig probe;
      probe.sample_size = cfg.probe_sample_size;
      probe.seed = derive_seed(cfg.seed, 103);
      probe.optimizer = cfg.optimizer;
      return infer_delta(data, cfg.epsilon, parse_kernel(cfg.kernel).bound_to(data.dim()), probe);
    }
    case SizingChoice::FixedDelta:
      return plan_from_delta(n, cfg.delta);
    case SizingChoice::FixedSize:
      return plan_from_size(n, cfg.subset_size);
  }
  throw InputError("unknown sizing choice");
}

int run_size(RunConfig cfg, const FlagState& state, std::size_t explicit_n, bool as_json) {
  RunConfig final_cfg = cfg;
  finalize_config(final_cfg, state);

  SizingPlan plan;
  if (!final_cfg.data_path.empty()) {
    const Dataset data = load_for_config(final_cfg, nullptr);
    plan = plan_for_config(final_cfg, data);
  } else {
    if (final_cfg.sizing == SizingChoice::Probe)
      throw InputError("probe sizing needs --data; the formula variants accept --n");
    if (explicit_n == 0) throw InputError("provide --n or --data");
    RunConfig sized = final_cfg;
    Dataset dummy;  // plan_for_config only reads the row count for these methods
    dummy.X = Eigen::MatrixXd::Zero(1, 1);
    dummy.y = Eigen::VectorXd::Zero(1);
    switch (sized.sizing) {
      case SizingChoice::Formula:
        plan = size_by_formula(explicit_n, sized.epsilon, sized.c);
        break;
      case SizingChoice::FixedDelta:
        plan = plan_from_delta(explicit_n, sized.delta);
        break;
      case SizingChoice::FixedSize:
        plan = plan_from_size(explicit_n, sized.subset_size);
        break;
      case SizingChoice::Probe:
        break;  // unreachable
    }
  }
  print_plan(plan, as_json);
  return 0;
}

int run_fit(RunConfig cfg, const FlagState& state) {
  finalize_config(cfg, state);
  if (cfg.data_path.empty()) throw InputError("fit needs --data (use bench-sinc for generated data)");
  if (cfg.model_out.empty()) throw InputError("fit needs --model-out");

  std::size_t dropped = 0;
  const Dataset data = load_for_config(cfg, &dropped);
  const SizingPlan plan = plan_for_config(cfg, data);

  EnsembleConfig ec;
  ec.estimators = cfg.estimators;
  ec.subset_size = plan.subset_size;
  ec.with_replacement = cfg.with_replacement;
  ec.combination = cfg.combination;
  ec.standardize = cfg.standardize;
  ec.seed = derive_seed(cfg.seed, 104);
  ec.workers = cfg.workers;

  const auto start = std::chrono::steady_clock::now();
  const EnsembleModel model = fit_ensemble(data, parse_kernel(cfg.kernel), ec, cfg.optimizer);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_model(model, cfg.model_out);

  double mean_lml = 0.0;
  for (const auto& member : model.members) mean_lml += log_marginal_likelihood(member);
  mean_lml /= static_cast<double>(model.members.size());

  std::cout << "rows = " << data.size() << "\n"
            << "dropped_rows = " << dropped << "\n"
            << "subset_size = " << plan.subset_size << "\n"
            << "estimators = " << model.members.size() << "\n"
            << "mean_member_lml = " << mean_lml << "\n"
            << "fit_seconds = " << seconds << "\n"
            << "model = " << cfg.model_out << "\n";
  return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path,
                const std::string& delimiter, const std::string& target,
                const std::vector<std::string>& features, const std::string& out_path,
                bool include_noise, const std::string& combination) {
  const EnsembleModel model = load_model(model_path);

  LoadSpec spec;
  spec.delimiter = parse_delimiter(delimiter);
  spec.target = target;
  spec.features = features;
  spec.standardize = false;  // the archive's scaler owns the transform
  const LoadResult loaded = load_delimited(data_path, spec);
  if (loaded.data.dim() != model.scaler.dim() && model.scaler.dim() != 0)
    throw InputError("predict: model expects " + std::to_string(model.scaler.dim()) +
                     " feature columns, file has " + std::to_string(loaded.data.dim()));

  PredictOptions options;
  options.include_observation_noise = include_noise;
  const auto preds =
      combination.empty()
          ? predict_ensemble(model, loaded.data.X, options)
          : predict_ensemble(model, loaded.data.X, combination_from_name(combination), options);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw InputError("cannot open " + out_path + " for writing");
    out = &file;
  }
  out->precision(17);
  for (const auto& name : loaded.feature_names) *out << name << ",";
  if (!target.empty()) *out << "truth,";
  *out << "mean,variance\n";
  for (Eigen::Index i = 0; i < loaded.data.size(); ++i) {
    for (Eigen::Index c = 0; c < loaded.data.dim(); ++c) *out << loaded.data.X(i, c) << ",";
    if (!target.empty()) *out << loaded.data.y(i) << ",";
    const auto& p = preds[static_cast<std::size_t>(i)];
    *out << p.mean << "," << p.variance << "\n";
  }
  if (!*out) throw InputError("write failed");

  if (!target.empty()) {
    Eigen::VectorXd mu(loaded.data.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) = preds[static_cast<std::size_t>(i)].mean;
    const EvalResult eval = evaluate(mu, loaded.data.y);
    std::cerr << "rmse = " << eval.rmse << "\n"
              << "sd_baseline = " << eval.sd_baseline << "\n";
  }
  return 0;
}

int run_eval(RunConfig cfg, const FlagState& state) {
  finalize_config(cfg, state);
  const RunReport report = run_experiment(cfg);
  std::cout << report_to_text(report);
  if (report.status != "ok") {
    std::cerr << "error: " << report.error << "\n";
    return 1;
  }
  return 0;
}

// ---- selftest -------------------------------------------------------------

bool check_sizing_points() {
  return size_by_formula(1000000, 1.0, 1.0).subset_size == 193 &&
         size_by_formula(1000000, 1.0, 0.5).subset_size == 386 &&
         size_by_formula(1000000, 1024.0, 1.0).subset_size == 97;
}

bool check_combination_algebra() {
  auto rng = make_engine(1, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + uniform_index(rng, 8);
    std::vector<Prediction> members(k);
    double mean_sum = 0.0, var_sum = 0.0, prec_sum = 0.0, weighted = 0.0;
    for (auto& p : members) {
      p.mean = uniform_real(rng, -4.0, 4.0);
      p.variance = uniform_real(rng, 1e-6, 3.0);
      mean_sum += p.mean;
      var_sum += p.variance;
      const double prec = 1.0 / std::max(p.variance, 1e-12);
      prec_sum += prec;
      weighted += prec * p.mean;
    }
    const double kd = static_cast<double>(k);
    const Prediction avg = combine_average(members);
    const Prediction poe = combine_poe(members);
    if (std::abs(avg.mean - mean_sum / kd) > 1e-12) return false;
    if (std::abs(avg.variance - var_sum / (kd * kd)) > 1e-12) return false;
    if (std::abs(poe.variance - 1.0 / prec_sum) > 1e-12) return false;
    if (std::abs(poe.mean - weighted / prec_sum) > 1e-12) return false;
  }
  return true;
}

bool check_dense_equivalence() {
  auto rng = make_engine(2, 0);
  Dataset data;
  data.X = Eigen::MatrixXd(40, 2);
  data.y = Eigen::VectorXd(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    data.X(i, 0) = standard_normal(rng);
    data.X(i, 1) = standard_normal(rng);
    data.y(i) = standard_normal(rng);
  }
  const KernelSpec kernel = parse_kernel("rbf + bias").bound_to(2);
  const NoiseSpec noise{0.1, true};
  const GPModel model = fit_exact(data, kernel, noise);

  Eigen::MatrixXd Kn = gram(kernel, data.X);
  Kn.diagonal().array() += noise.sigma_sq + model.jitter;
  const Eigen::MatrixXd Kinv = Kn.inverse();

  Eigen::MatrixXd Xs(8, 2);
  for (Eigen::Index i = 0; i < Xs.size(); ++i) Xs(i / 2, i % 2) = standard_normal(rng);
  const auto fast = predict(model, Xs);
  const Eigen::MatrixXd Kx = gram(kernel, data.X, Xs);
  const Eigen::VectorXd prior = gram_diagonal(kernel, Xs);
  for (Eigen::Index i = 0; i < 8; ++i) {
    const Eigen::VectorXd kx = Kx.col(i);
    const double mean = kx.dot(Kinv * data.y);
    const double var = prior(i) - kx.dot(Kinv * kx);
    const auto& p = fast[static_cast<std::size_t>(i)];
    if (std::abs(p.mean - mean) / std::max({std::abs(mean), 1e-6}) > 1e-8) return false;
    if (std::abs(p.variance - var) / std::max({std::abs(var), 1e-6}) > 1e-6) return false;
  }
  return true;
}

bool check_gradient() {
  auto rng = make_engine(3, 0);
  Dataset data;
  data.X = Eigen::MatrixXd(20, 2);
  data.y = Eigen::VectorXd(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    data.X(i, 0) = standard_normal(rng);
    data.X(i, 1) = standard_normal(rng);
    data.y(i) = standard_normal(rng);
  }
  const KernelSpec kernel = parse_kernel("rbf").bound_to(2);
  const NoiseSpec noise{0.2, false};
  const GPModel model = fit_exact(data, kernel, noise);
  const Eigen::VectorXd analytic = lml_gradient(model);

  const Eigen::VectorXd logs = kernel.free_log_params();
  const Eigen::Index nk = logs.size();
  const double h = 1e-5;
  for (Eigen::Index j = 0; j < analytic.size(); ++j) {
    auto value_at = [&](double shift) {
      Eigen::VectorXd l = logs;
      NoiseSpec n = noise;
      if (j < nk)
        l(j) += shift;
      else
        n.sigma_sq = std::exp(std::log(noise.sigma_sq) + shift);
      return log_marginal_likelihood(fit_exact(data, kernel.with_free_log_params(l), n));
    };
    const double fd = (value_at(h) - value_at(-h)) / (2.0 * h);
    if (std::abs(analytic(j) - fd) / std::max(std::abs(fd), 1e-6) > 1e-4) return false;
  }
  return true;
}

bool check_sinc_determinism() {
  SincSpec spec;
  spec.n = 200;
  const Dataset a = generate_sinc(spec, 5);
  const Dataset b = generate_sinc(spec, 5);
  if (a.X != b.X || a.y != b.y) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a.y(i) != sinc_value(a.X(i, 0))) return false;
  const SplitResult split = train_test_split(a, 0.7, 1);
  return split.train.size() == 140 && split.test.size() == 60;
}

int run_selftest() {
  struct Check {
    const char* name;
    bool (*fn)();
  };
  const Check checks[] = {
      {"sizing formula reference points", check_sizing_points},
      {"combination rule algebra", check_combination_algebra},
      {"dense-inversion equivalence", check_dense_equivalence},
      {"marginal-likelihood gradient", check_gradient},
      {"sinc generator determinism", check_sinc_determinism},
  };
  int failures = 0;
  for (const auto& check : checks) {
    bool ok = false;
    try {
      ok = check.fn();
    } catch (const std::exception& e) {
      std::cout << "FAIL - " << check.name << " (" << e.what() << ")\n";
      ++failures;
      continue;
    }
    std::cout << (ok ? "ok - " : "FAIL - ") << check.name << "\n";
    if (!ok) ++failures;
  }
  std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalable GP regression: bootstrap ensembles of exact GPs"};
  app.set_version_flag("--version", std::string(library_version));
  app.require_subcommand(1);

  // size ---------------------------------------------------------------
  RunConfig size_cfg;
  FlagState size_state;
  std::size_t size_n = 0;
  bool size_json = false;
  CLI::App* size_cmd = app.add_subcommand("size", "Compute a subset-size plan");
  size_cmd->add_option("--n", size_n, "Dataset size (instead of --data, non-probe methods)");
  add_data_flags(size_cmd, size_cfg, size_state);
  add_sizing_flags(size_cmd, size_cfg, size_state);
  size_cmd->add_option("--kernel", size_cfg.kernel, "Kernel for probe fits")
      ->capture_default_str();
  add_optimizer_flags(size_cmd, size_cfg);
  size_cmd->add_option("--seed", size_cfg.seed, "Probe sampling seed")->capture_default_str();
  size_cmd->add_flag("--json", size_json, "Emit the plan as JSON");
  add_config_flag(size_cmd, size_state);

  // fit ----------------------------------------------------------------
  RunConfig fit_cfg;
  FlagState fit_state;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit an ensemble on a whole file");
  add_data_flags(fit_cmd, fit_cfg, fit_state);
  add_sizing_flags(fit_cmd, fit_cfg, fit_state);
  add_ensemble_flags(fit_cmd, fit_cfg, fit_state);
  add_optimizer_flags(fit_cmd, fit_cfg);
  fit_cmd->add_option("--seed", fit_cfg.seed, "Run seed")->capture_default_str();
  fit_cmd->add_option("--model-out", fit_cfg.model_out, "Archive path (required)");
  add_config_flag(fit_cmd, fit_state);

  // predict --------------------------------------------------------------
  std::string predict_model, predict_data, predict_out = "-", predict_target;
  std::string predict_delimiter = ",", predict_combination;
  std::vector<std::string> predict_features;
  bool predict_noise = false;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Apply a saved model to a file");
  predict_cmd->add_option("--model", predict_model, "Model archive")->required();
  predict_cmd->add_option("--data", predict_data, "Delimited input file")->required();
  predict_cmd->add_option("--delimiter", predict_delimiter, "Cell delimiter")
      ->capture_default_str();
  predict_cmd->add_option("--target", predict_target,
                          "Truth column (optional; adds metrics on stderr)");
  predict_cmd->add_option("--features", predict_features, "Feature columns, comma separated")
      ->delimiter(',');
  predict_cmd->add_option("--out", predict_out, "Output file, '-' for stdout")
      ->capture_default_str();
  predict_cmd->add_flag("--include-noise", predict_noise,
                        "Add the observation-noise variance to predictive variances");
  predict_cmd->add_option("--combination", predict_combination,
                          "Override the archived combination rule");

  // eval -----------------------------------------------------------------
  RunConfig eval_cfg;
  FlagState eval_state;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Split, fit, and score an experiment");
  add_data_flags(eval_cmd, eval_cfg, eval_state);
  add_sinc_flags(eval_cmd, eval_cfg);
  add_sizing_flags(eval_cmd, eval_cfg, eval_state);
  add_ensemble_flags(eval_cmd, eval_cfg, eval_state);
  add_optimizer_flags(eval_cmd, eval_cfg);
  eval_cmd->add_option("--train-fraction", eval_cfg.train_fraction, "Training split share")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval_cfg.seed, "Run seed")->capture_default_str();
  eval_cmd->add_flag("--both", eval_cfg.evaluate_both_combinations,
                     "Score both combination rules");
  add_output_flags(eval_cmd, eval_cfg);
  add_config_flag(eval_cmd, eval_state);

  // bench-sinc -----------------------------------------------------------
  RunConfig bench_cfg;
  bench_cfg.sizing = SizingChoice::FixedDelta;
  bench_cfg.delta = 0.5;
  bench_cfg.optimizer.restarts = 1;
  bench_cfg.optimizer.max_iterations = 60;
  bench_cfg.evaluate_both_combinations = true;
  FlagState bench_state;
  bench_state.sizing = "delta";
  CLI::App* bench_cmd =
      app.add_subcommand("bench-sinc", "Sinc benchmark: 100k rows, 70/30, K=30, RBF");
  add_sinc_flags(bench_cmd, bench_cfg);
  add_sizing_flags(bench_cmd, bench_cfg, bench_state);
  add_ensemble_flags(bench_cmd, bench_cfg, bench_state);
  add_optimizer_flags(bench_cmd, bench_cfg);
  bench_cmd->add_option("--train-fraction", bench_cfg.train_fraction, "Training split share")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_cfg.seed, "Run seed (required)")->required();
  add_output_flags(bench_cmd, bench_cfg);
  add_config_flag(bench_cmd, bench_state);

  // selftest ---------------------------------------------------------------
  CLI::App* selftest_cmd = app.add_subcommand("selftest", "Run the built-in checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*size_cmd) return run_size(size_cfg, size_state, size_n, size_json);
    if (*fit_cmd) return run_fit(fit_cfg, fit_state);
    if (*predict_cmd)
      return run_predict(predict_model, predict_data, predict_delimiter, predict_target,
                         predict_features, predict_out, predict_noise, predict_combination);
    if (*eval_cmd) return run_eval(eval_cfg, eval_state);
    if (*bench_cmd) return run_eval(bench_cfg, bench_state);
    if (*selftest_cmd) return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
