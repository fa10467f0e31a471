#include "gpbag/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gpbag/rng.hpp"
#include "gpbag/version.hpp"

namespace gpbag {

namespace {

using nlohmann::json;

// Substream labels off the run seed; every stage gets its own engine.
constexpr std::uint64_t stream_data = 101;
constexpr std::uint64_t stream_split = 102;
constexpr std::uint64_t stream_probe = 103;
constexpr std::uint64_t stream_ensemble = 104;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const char* sizing_choice_name(SizingChoice choice) {
  switch (choice) {
    case SizingChoice::Formula: return "formula";
    case SizingChoice::Probe: return "probe";
    case SizingChoice::FixedDelta: return "delta";
    case SizingChoice::FixedSize: return "size";
  }
  throw InputError("config: unknown sizing choice");
}

SizingChoice sizing_choice_from_name(const std::string& name) {
  if (name == "formula") return SizingChoice::Formula;
  if (name == "probe") return SizingChoice::Probe;
  if (name == "delta") return SizingChoice::FixedDelta;
  if (name == "size") return SizingChoice::FixedSize;
  throw InputError("config: unknown sizing method '" + name +
                   "' (use formula, probe, delta, or size)");
}

json config_json(const RunConfig& c) {
  json j;
  j["data"] = {{"path", c.data_path},
               {"delimiter", std::string(1, c.delimiter)},
               {"target", c.target},
               {"features", c.features},
               {"standardize", c.standardize}};
  j["sinc"] = {{"n", c.sinc.n},
               {"x_min", c.sinc.x_min},
               {"x_max", c.sinc.x_max},
               {"noise_sd", c.sinc.noise_sd}};
  j["kernel"] = c.kernel;
  j["sizing"] = {{"method", sizing_choice_name(c.sizing)},
                 {"epsilon", c.epsilon},
                 {"c", c.c},
                 {"delta", c.delta},
                 {"subset_size", c.subset_size},
                 {"probe_sample_size", c.probe_sample_size}};
  j["ensemble"] = {{"estimators", c.estimators},
                   {"combination", combination_name(c.combination)},
                   {"with_replacement", c.with_replacement}};
  j["optimizer"] = {{"restarts", c.optimizer.restarts},
                    {"max_iterations", c.optimizer.max_iterations},
                    {"grad_tolerance", c.optimizer.grad_tolerance},
                    {"log_lower_bound", c.optimizer.log_lower_bound},
                    {"log_upper_bound", c.optimizer.log_upper_bound}};
  j["split"] = {{"train_fraction", c.train_fraction}};
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["evaluate_both_combinations"] = c.evaluate_both_combinations;
  j["outputs"] = {{"model", c.model_out},
                  {"report", c.report_out},
                  {"report_text", c.report_text_out},
                  {"predictions", c.predictions_out}};
  return j;
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end())
      throw InputError("config: unknown key '" + where + key + "'");
  }
}

void apply_config(RunConfig& c, const json& j) {
  if (!j.is_object()) throw InputError("config: top level must be a JSON object");
  reject_unknown_keys(j,
                      {"data", "sinc", "kernel", "sizing", "ensemble", "optimizer", "split",
                       "seed", "workers", "evaluate_both_combinations", "outputs"},
                      "");
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown_keys(d, {"path", "delimiter", "target", "features", "standardize"}, "data.");
    if (d.contains("path")) c.data_path = d.at("path").get<std::string>();
    if (d.contains("delimiter")) {
      const auto s = d.at("delimiter").get<std::string>();
      if (s.size() != 1) throw InputError("config: data.delimiter must be one character");
      c.delimiter = s[0];
    }
    if (d.contains("target")) c.target = d.at("target").get<std::string>();
    if (d.contains("features")) c.features = d.at("features").get<std::vector<std::string>>();
    if (d.contains("standardize")) c.standardize = d.at("standardize").get<bool>();
  }
  if (j.contains("sinc")) {
    const json& s = j.at("sinc");
    reject_unknown_keys(s, {"n", "x_min", "x_max", "noise_sd"}, "sinc.");
    if (s.contains("n")) c.sinc.n = s.at("n").get<std::size_t>();
    if (s.contains("x_min")) c.sinc.x_min = s.at("x_min").get<double>();
    if (s.contains("x_max")) c.sinc.x_max = s.at("x_max").get<double>();
    if (s.contains("noise_sd")) c.sinc.noise_sd = s.at("noise_sd").get<double>();
  }
  if (j.contains("kernel")) c.kernel = j.at("kernel").get<std::string>();
  if (j.contains("sizing")) {
    const json& s = j.at("sizing");
    reject_unknown_keys(s, {"method", "epsilon", "c", "delta", "subset_size", "probe_sample_size"},
                        "sizing.");
    if (s.contains("method")) c.sizing = sizing_choice_from_name(s.at("method").get<std::string>());
    if (s.contains("epsilon")) c.epsilon = s.at("epsilon").get<double>();
    if (s.contains("c")) c.c = s.at("c").get<double>();
    if (s.contains("delta")) c.delta = s.at("delta").get<double>();
    if (s.contains("subset_size")) c.subset_size = s.at("subset_size").get<std::size_t>();
    if (s.contains("probe_sample_size"))
      c.probe_sample_size = s.at("probe_sample_size").get<std::size_t>();
  }
  if (j.contains("ensemble")) {
    const json& e = j.at("ensemble");
    reject_unknown_keys(e, {"estimators", "combination", "with_replacement"}, "ensemble.");
    if (e.contains("estimators")) c.estimators = e.at("estimators").get<int>();
    if (e.contains("combination"))
      c.combination = combination_from_name(e.at("combination").get<std::string>());
    if (e.contains("with_replacement")) c.with_replacement = e.at("with_replacement").get<bool>();
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown_keys(
        o, {"restarts", "max_iterations", "grad_tolerance", "log_lower_bound", "log_upper_bound"},
        "optimizer.");
    if (o.contains("restarts")) c.optimizer.restarts = o.at("restarts").get<int>();
    if (o.contains("max_iterations"))
      c.optimizer.max_iterations = o.at("max_iterations").get<int>();
    if (o.contains("grad_tolerance"))
      c.optimizer.grad_tolerance = o.at("grad_tolerance").get<double>();
    if (o.contains("log_lower_bound"))
      c.optimizer.log_lower_bound = o.at("log_lower_bound").get<double>();
    if (o.contains("log_upper_bound"))
      c.optimizer.log_upper_bound = o.at("log_upper_bound").get<double>();
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    reject_unknown_keys(s, {"train_fraction"}, "split.");
    if (s.contains("train_fraction")) c.train_fraction = s.at("train_fraction").get<double>();
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  if (j.contains("evaluate_both_combinations"))
    c.evaluate_both_combinations = j.at("evaluate_both_combinations").get<bool>();
  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    reject_unknown_keys(o, {"model", "report", "report_text", "predictions"}, "outputs.");
    if (o.contains("model")) c.model_out = o.at("model").get<std::string>();
    if (o.contains("report")) c.report_out = o.at("report").get<std::string>();
    if (o.contains("report_text")) c.report_text_out = o.at("report_text").get<std::string>();
    if (o.contains("predictions")) c.predictions_out = o.at("predictions").get<std::string>();
  }
}

json parse_config_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
}

json report_json(const RunReport& r) {
  json j;
  j["format"] = "gpbag-report";
  j["version"] = report_version;
  j["library_version"] = library_version;
  j["status"] = r.status;
  j["error"] = r.error;
  j["config"] = config_json(r.config);

  if (r.has_data) {
    j["data"] = {{"n_train", r.n_train},
                 {"n_test", r.n_test},
                 {"dimensions", r.dimensions},
                 {"dropped_rows", r.dropped_rows}};
  } else {
    j["data"] = nullptr;
  }

  if (r.has_plan) {
    json trace = json::array();
    for (const auto& p : r.plan.trace)
      trace.push_back({{"delta", p.delta}, {"subset_size", p.subset_size}, {"rmse", p.rmse}});
    j["sizing"] = {{"method", sizing_method_name(r.plan.method)},
                   {"dataset_size", r.plan.dataset_size},
                   {"epsilon", r.plan.epsilon},
                   {"c", r.plan.c},
                   {"delta", r.plan.delta},
                   {"subset_size", r.plan.subset_size},
                   {"effective_delta", r.plan.effective_delta},
                   {"target_met", r.plan.target_met},
                   {"full_data_fallback", r.plan.full_data_fallback},
                   {"trace", std::move(trace)}};
  } else {
    j["sizing"] = nullptr;
  }

  if (!r.member_lml.empty()) {
    j["members"] = {{"count", r.member_lml.size()}, {"lml", r.member_lml}};
  } else {
    j["members"] = nullptr;
  }

  if (r.has_metrics) {
    json metrics = {{"rmse", r.rmse}, {"sd_baseline", r.sd_baseline}};
    if (r.has_both) {
      metrics["rmse_average"] = r.rmse_average;
      metrics["rmse_poe"] = r.rmse_poe;
    } else {
      metrics["rmse_average"] = nullptr;
      metrics["rmse_poe"] = nullptr;
    }
    j["metrics"] = std::move(metrics);
  } else {
    j["metrics"] = nullptr;
  }

  j["timings"] = {{"sizing_seconds", r.sizing_seconds},
                  {"fit_seconds", r.fit_seconds},
                  {"predict_seconds", r.predict_seconds}};
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw InputError("report: cannot open " + path + " for writing");
  out << content;
  if (!out) throw InputError("report: write failed for " + path);
}

}  // namespace

double sinc_value(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(x) / x;
}

Dataset generate_sinc(const SincSpec& spec, std::uint64_t seed) {
  if (spec.n == 0) throw InputError("sinc: n must be positive");
  if (!(spec.x_max > spec.x_min)) throw InputError("sinc: x_max must exceed x_min");
  if (spec.noise_sd < 0.0) throw InputError("sinc: noise_sd must be non-negative");

  auto x_rng = make_engine(seed, 0);
  auto noise_rng = make_engine(seed, 1);
  Dataset data;
  data.X.resize(static_cast<Eigen::Index>(spec.n), 1);
  data.y.resize(static_cast<Eigen::Index>(spec.n));
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    const double x = uniform_real(x_rng, spec.x_min, spec.x_max);
    data.X(i, 0) = x;
    double y = sinc_value(x);
    if (spec.noise_sd > 0.0) y += spec.noise_sd * standard_normal(noise_rng);
    data.y(i) = y;
  }
  return data;
}

SplitResult train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  validate(data);
  const auto n = static_cast<std::size_t>(data.size());
  if (n < 2) throw InputError("split: need at least two rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InputError("split: train_fraction must be inside (0, 1)");

  auto rng = make_engine(seed, 0);
  const auto order = shuffled_indices(rng, n);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n))), 1, n - 1);

  SplitResult out;
  out.train = subset_rows(data, {order.begin(), order.begin() + static_cast<long>(n_train)});
  out.test = subset_rows(data, {order.begin() + static_cast<long>(n_train), order.end()});
  return out;
}

EvalResult evaluate(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths) {
  if (predictions.size() != truths.size())
    throw InputError("evaluate: prediction and truth sizes differ");
  if (predictions.size() == 0) throw InputError("evaluate: nothing to score");
  EvalResult res;
  res.rmse = std::sqrt((predictions - truths).squaredNorm() /
                       static_cast<double>(predictions.size()));
  const double mean = truths.mean();
  res.sd_baseline =
      std::sqrt((truths.array() - mean).square().sum() / static_cast<double>(truths.size()));
  return res;
}

RunReport run_experiment(const RunConfig& config) {
  RunReport report;
  report.config = config;

  try {
    const KernelSpec tmpl = parse_kernel(config.kernel);

    Dataset all;
    if (config.data_path.empty()) {
      all = generate_sinc(config.sinc, derive_seed(config.seed, stream_data));
      if (config.standardize) all = standardized(all);
    } else {
      LoadSpec spec;
      spec.delimiter = config.delimiter;
      spec.target = config.target;
      spec.features = config.features;
      spec.standardize = config.standardize;
      LoadResult loaded = load_delimited(config.data_path, spec);
      all = std::move(loaded.data);
      report.dropped_rows = loaded.dropped_rows;
    }

    const SplitResult split =
        train_test_split(all, config.train_fraction, derive_seed(config.seed, stream_split));
    report.has_data = true;
    report.n_train = static_cast<std::size_t>(split.train.size());
    report.n_test = static_cast<std::size_t>(split.test.size());
    report.dimensions = split.train.dim();

    const auto t_sizing = std::chrono::steady_clock::now();
    switch (config.sizing) {
      case SizingChoice::Formula:
        report.plan = size_by_formula(report.n_train, config.epsilon, config.c);
        break;
      case SizingChoice::Probe: {
        ProbeConfig probe;
        probe.sample_size = config.probe_sample_size;
        probe.seed = derive_seed(config.seed, stream_probe);
        probe.optimizer = config.optimizer;
        report.plan = infer_delta(split.train, config.epsilon, tmpl.bound_to(split.train.dim()),
                                  probe);
        break;
      }
      case SizingChoice::FixedDelta:
        report.plan = plan_from_delta(report.n_train, config.delta);
        break;
      case SizingChoice::FixedSize:
        report.plan = plan_from_size(report.n_train, config.subset_size);
        break;
    }
    report.sizing_seconds = seconds_since(t_sizing);
    report.has_plan = true;

    EnsembleConfig ec;
    ec.estimators = config.estimators;
    ec.subset_size = report.plan.subset_size;
    ec.with_replacement = config.with_replacement;
    ec.combination = config.combination;
    ec.standardize = config.standardize;
    ec.seed = derive_seed(config.seed, stream_ensemble);
    ec.workers = config.workers;

    const auto t_fit = std::chrono::steady_clock::now();
    const EnsembleModel model = fit_ensemble(split.train, tmpl, ec, config.optimizer);
    report.fit_seconds = seconds_since(t_fit);
    for (const auto& member : model.members)
      report.member_lml.push_back(log_marginal_likelihood(member));

    // Score in original units: undo whatever transform the split carries.
    const Eigen::MatrixXd test_X_raw = split.test.applied.invert_x(split.test.X);
    const Eigen::VectorXd test_y_raw = split.test.applied.invert_y(split.test.y);

    const auto t_predict = std::chrono::steady_clock::now();
    const auto preds = predict_ensemble(model, test_X_raw);
    report.predict_seconds = seconds_since(t_predict);

    Eigen::VectorXd mu(static_cast<Eigen::Index>(preds.size()));
    for (std::size_t i = 0; i < preds.size(); ++i) mu(static_cast<Eigen::Index>(i)) = preds[i].mean;
    const EvalResult eval = evaluate(mu, test_y_raw);
    report.rmse = eval.rmse;
    report.sd_baseline = eval.sd_baseline;
    report.has_metrics = true;

    if (config.evaluate_both_combinations) {
      auto rmse_for = [&](Combination rule) {
        const auto p = predict_ensemble(model, test_X_raw, rule);
        Eigen::VectorXd v(static_cast<Eigen::Index>(p.size()));
        for (std::size_t i = 0; i < p.size(); ++i) v(static_cast<Eigen::Index>(i)) = p[i].mean;
        return evaluate(v, test_y_raw).rmse;
      };
      report.rmse_average = config.combination == Combination::Average
                                ? eval.rmse
                                : rmse_for(Combination::Average);
      report.rmse_poe = config.combination == Combination::ProductOfExperts
                            ? eval.rmse
                            : rmse_for(Combination::ProductOfExperts);
      report.has_both = true;
    }

    if (!config.model_out.empty()) save_model(model, config.model_out);
    if (!config.predictions_out.empty()) {
      std::ofstream out(config.predictions_out);
      if (!out)
        throw InputError("predictions: cannot open " + config.predictions_out + " for writing");
      out.precision(17);
      for (Eigen::Index c = 0; c < test_X_raw.cols(); ++c) out << "x" << c << ",";
      out << "truth,mean,variance\n";
      for (Eigen::Index r = 0; r < test_X_raw.rows(); ++r) {
        for (Eigen::Index c = 0; c < test_X_raw.cols(); ++c) out << test_X_raw(r, c) << ",";
        out << test_y_raw(r) << "," << preds[static_cast<std::size_t>(r)].mean << ","
            << preds[static_cast<std::size_t>(r)].variance << "\n";
      }
      if (!out) throw InputError("predictions: write failed for " + config.predictions_out);
    }

    report.status = "ok";
  } catch (const std::exception& e) {
    report.status = "failed";
    report.error = e.what();
  }

  // Reports are written on success and failure alike.
  try {
    if (!config.report_out.empty()) write_text_file(config.report_out, report_to_json(report));
    if (!config.report_text_out.empty())
      write_text_file(config.report_text_out, report_to_text(report));
  } catch (const std::exception& e) {
    report.status = "failed";
    if (!report.error.empty()) report.error += "; ";
    report.error += e.what();
  }
  return report;
}

std::string config_to_json(const RunConfig& config) { return config_json(config).dump(1); }

RunConfig config_from_json(const std::string& text) {
  RunConfig config;
  apply_config(config, parse_config_text(text));
  return config;
}

RunConfig config_with_overrides(const RunConfig& base, const std::string& text) {
  RunConfig config = base;
  apply_config(config, parse_config_text(text));
  return config;
}

std::string report_to_json(const RunReport& report) { return report_json(report).dump(1) + "\n"; }

std::string report_to_text(const RunReport& report) {
  std::ostringstream out;
  out.precision(12);
  out << "status = " << report.status << "\n";
  if (!report.error.empty()) out << "error = " << report.error << "\n";
  out << "kernel = " << report.config.kernel << "\n";
  out << "combination = " << combination_name(report.config.combination) << "\n";
  out << "seed = " << report.config.seed << "\n";
  if (report.has_data) {
    out << "n_train = " << report.n_train << "\n";
    out << "n_test = " << report.n_test << "\n";
    out << "dimensions = " << report.dimensions << "\n";
    out << "dropped_rows = " << report.dropped_rows << "\n";
  }
  if (report.has_plan) {
    const SizingPlan& p = report.plan;
    out << "sizing_method = " << sizing_method_name(p.method) << "\n";
    out << "subset_size = " << p.subset_size << "\n";
    out << "delta = " << p.delta << "\n";
    out << "effective_delta = " << p.effective_delta << "\n";
    out << "target_met = " << (p.target_met ? "true" : "false") << "\n";
    if (p.full_data_fallback) out << "full_data_fallback = true\n";
    for (const auto& t : p.trace) {
      out << "probe delta=" << t.delta << " subset_size=" << t.subset_size
          << " rmse=" << t.rmse << "\n";
    }
  }
  if (!report.member_lml.empty()) {
    double lo = report.member_lml.front(), hi = lo, sum = 0.0;
    for (double v : report.member_lml) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    out << "estimators = " << report.member_lml.size() << "\n";
    out << "member_lml_min = " << lo << "\n";
    out << "member_lml_mean = " << sum / static_cast<double>(report.member_lml.size()) << "\n";
    out << "member_lml_max = " << hi << "\n";
  }
  if (report.has_metrics) {
    out << "rmse = " << report.rmse << "\n";
    out << "sd_baseline = " << report.sd_baseline << "\n";
    if (report.has_both) {
      out << "rmse_average = " << report.rmse_average << "\n";
      out << "rmse_poe = " << report.rmse_poe << "\n";
    }
  }
  out << "sizing_seconds = " << report.sizing_seconds << "\n";
  out << "fit_seconds = " << report.fit_seconds << "\n";
  out << "predict_seconds = " << report.predict_seconds << "\n";
  return out.str();
}

}  // namespace gpbag
