#include "gpbag/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "gpbag/rng.hpp"
#include "gpbag/version.hpp"

namespace gpbag {

namespace {

using nlohmann::json;

constexpr double poe_variance_floor = 1e-12;

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs fn(0..count-1) across a small thread pool. Work items only write
// their own slots, so scheduling cannot change any result. The first failing
// index's exception is rethrown.
void run_indexed(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const int pool = std::min<int>(resolve_workers(workers), static_cast<int>(count));
  std::vector<std::exception_ptr> errors(count);
  if (pool <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(pool));
    for (int t = 0; t < pool; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

void check_config(const EnsembleConfig& config, std::size_t n) {
  if (config.estimators < 1) throw InputError("ensemble: estimators must be at least 1");
  if (config.subset_size < 1 || config.subset_size > n)
    throw InputError("ensemble: subset_size must be between 1 and the training size (" +
                     std::to_string(n) + ")");
  if (config.workers < 0) throw InputError("ensemble: workers must be non-negative");
}

// Distinct streams per member: draws on even streams, fits on odd ones.
std::uint64_t draw_stream(int member) { return 2 * static_cast<std::uint64_t>(member); }
std::uint64_t fit_stream(int member) { return 2 * static_cast<std::uint64_t>(member) + 1; }

json scaler_to_json(const Standardizer& s) {
  json j;
  j["x_mean"] = std::vector<double>(s.x_mean.data(), s.x_mean.data() + s.x_mean.size());
  j["x_scale"] = std::vector<double>(s.x_scale.data(), s.x_scale.data() + s.x_scale.size());
  j["y_mean"] = s.y_mean;
  j["y_scale"] = s.y_scale;
  return j;
}

Standardizer scaler_from_json(const json& j) {
  Standardizer s;
  const auto xm = j.at("x_mean").get<std::vector<double>>();
  const auto xs = j.at("x_scale").get<std::vector<double>>();
  if (xm.size() != xs.size()) throw ParseError("model archive: scaler size mismatch");
  s.x_mean = Eigen::Map<const Eigen::VectorXd>(xm.data(), static_cast<Eigen::Index>(xm.size()));
  s.x_scale = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  s.y_mean = j.at("y_mean").get<double>();
  s.y_scale = j.at("y_scale").get<double>();
  return s;
}

}  // namespace

const char* combination_name(Combination combination) {
  switch (combination) {
    case Combination::Average: return "average";
    case Combination::ProductOfExperts: return "poe";
  }
  throw InputError("ensemble: unknown combination rule");
}

Combination combination_from_name(const std::string& name) {
  if (name == "average") return Combination::Average;
  if (name == "poe" || name == "product-of-experts" || name == "product_of_experts")
    return Combination::ProductOfExperts;
  throw InputError("ensemble: unknown combination rule '" + name + "' (use average or poe)");
}

std::vector<std::vector<std::size_t>> member_draws(std::size_t n, const EnsembleConfig& config) {
  check_config(config, n);
  std::vector<std::vector<std::size_t>> draws(static_cast<std::size_t>(config.estimators));
  for (int i = 0; i < config.estimators; ++i) {
    auto rng = make_engine(config.seed, draw_stream(i));
    draws[static_cast<std::size_t>(i)] =
        config.with_replacement ? sample_with_replacement(rng, n, config.subset_size)
                                : sample_without_replacement(rng, n, config.subset_size);
  }
  return draws;
}

EnsembleModel fit_ensemble(const Dataset& data, const KernelSpec& kernel_template,
                           const EnsembleConfig& config, const OptimizerConfig& optimizer,
                           std::optional<NoiseSpec> noise) {
  validate(data);
  check_config(config, static_cast<std::size_t>(data.size()));
  const KernelSpec tmpl =
      kernel_template.bound() ? kernel_template : kernel_template.bound_to(data.dim());
  if (tmpl.input_dim() != data.dim())
    throw InputError("ensemble: kernel bound to " + std::to_string(tmpl.input_dim()) +
                     " columns, data has " + std::to_string(data.dim()));

  EnsembleModel model;
  model.config = config;
  model.kernel_text = format_kernel(tmpl);

  // Members train in standardized space; the stored scaler is the total
  // original-units -> model-units transform.
  Standardizer inner = config.standardize ? Standardizer::fit(data.X, data.y)
                                          : Standardizer::identity(data.dim());
  model.scaler = Standardizer::compose(data.applied, inner);

  Dataset fit_data;
  fit_data.X = inner.apply_x(data.X);
  fit_data.y = inner.apply_y(data.y);

  const auto draws = member_draws(static_cast<std::size_t>(data.size()), config);
  model.members.resize(static_cast<std::size_t>(config.estimators));

  run_indexed(static_cast<std::size_t>(config.estimators), config.workers, [&](std::size_t i) {
    try {
      const Dataset subset = subset_rows(fit_data, draws[i]);
      OptimizerConfig opt = optimizer;
      opt.seed = derive_seed(config.seed, fit_stream(static_cast<int>(i)));
      model.members[i] = fit_gp(subset, tmpl, opt, noise);
    } catch (const std::exception& e) {
      throw NumericalError("ensemble: member " + std::to_string(i) +
                           " failed to fit: " + e.what());
    }
  });
  return model;
}

Prediction combine_average(const std::vector<Prediction>& members) {
  if (members.empty()) throw InputError("combine: no member predictions");
  const double k = static_cast<double>(members.size());
  Prediction out;
  for (const auto& p : members) {
    out.mean += p.mean;
    out.variance += p.variance;
    out.variance_clipped = out.variance_clipped || p.variance_clipped;
  }
  out.mean /= k;
  out.variance /= k * k;
  return out;
}

Prediction combine_poe(const std::vector<Prediction>& members) {
  if (members.empty()) throw InputError("combine: no member predictions");
  Prediction out;
  double precision_sum = 0.0;
  double weighted_mean_sum = 0.0;
  for (const auto& p : members) {
    const double precision = 1.0 / std::max(p.variance, poe_variance_floor);
    precision_sum += precision;
    weighted_mean_sum += precision * p.mean;
    out.variance_clipped = out.variance_clipped || p.variance_clipped;
  }
  out.variance = 1.0 / precision_sum;
  out.mean = out.variance * weighted_mean_sum;
  return out;
}

std::vector<Prediction> predict_ensemble(const EnsembleModel& model,
                                         const Eigen::MatrixXd& X_star,
                                         const PredictOptions& options) {
  return predict_ensemble(model, X_star, model.config.combination, options);
}

std::vector<Prediction> predict_ensemble(const EnsembleModel& model,
                                         const Eigen::MatrixXd& X_star,
                                         Combination combination,
                                         const PredictOptions& options) {
  if (model.members.empty()) throw InputError("ensemble predict: model has no members");
  if (X_star.cols() != model.members.front().train.dim())
    throw InputError("ensemble predict: input has " + std::to_string(X_star.cols()) +
                     " columns, model was trained on " +
                     std::to_string(model.members.front().train.dim()));

  const Eigen::MatrixXd Xs = model.scaler.apply_x(X_star);
  const Eigen::Index m = Xs.rows();
  std::vector<Prediction> out(static_cast<std::size_t>(m));
  if (m == 0) return out;

  constexpr Eigen::Index block = 2048;
  const std::size_t blocks = static_cast<std::size_t>((m + block - 1) / block);
  run_indexed(blocks, model.config.workers, [&](std::size_t b) {
    const Eigen::Index start = static_cast<Eigen::Index>(b) * block;
    const Eigen::Index count = std::min(block, m - start);
    const Eigen::MatrixXd Xb = Xs.middleRows(start, count);

    std::vector<std::vector<Prediction>> member_preds(model.members.size());
    for (std::size_t i = 0; i < model.members.size(); ++i)
      member_preds[i] = predict(model.members[i], Xb, options);

    std::vector<Prediction> at_point(model.members.size());
    for (Eigen::Index r = 0; r < count; ++r) {
      for (std::size_t i = 0; i < model.members.size(); ++i)
        at_point[i] = member_preds[i][static_cast<std::size_t>(r)];
      Prediction combined = combination == Combination::Average ? combine_average(at_point)
                                                                : combine_poe(at_point);
      combined.mean = model.scaler.restore_mean(combined.mean);
      combined.variance = model.scaler.restore_variance(combined.variance);
      out[static_cast<std::size_t>(start + r)] = combined;
    }
  });
  return out;
}

Eigen::MatrixXd mixture_gram(const EnsembleModel& model, const Eigen::MatrixXd& X) {
  if (model.members.empty()) throw InputError("mixture_gram: model has no members");
  Eigen::MatrixXd K = gram(model.members.front().kernel, X);
  for (std::size_t i = 1; i < model.members.size(); ++i) K += gram(model.members[i].kernel, X);
  return K / static_cast<double>(model.members.size());
}

void save_model(const EnsembleModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "gpbag-model";
  j["version"] = archive_version;
  j["library_version"] = library_version;
  j["config"] = {
      {"estimators", model.config.estimators},
      {"subset_size", model.config.subset_size},
      {"with_replacement", model.config.with_replacement},
      {"combination", combination_name(model.config.combination)},
      {"standardize", model.config.standardize},
      {"seed", model.config.seed},
  };
  j["kernel"] = model.kernel_text;
  j["scaler"] = scaler_to_json(model.scaler);

  json members = json::array();
  for (const auto& member : model.members) {
    json m;
    const Eigen::MatrixXd& X = member.train.X;
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      rows[static_cast<std::size_t>(r)].assign(X.row(r).begin(), X.row(r).end());
    }
    m["x"] = rows;
    m["y"] = std::vector<double>(member.train.y.data(), member.train.y.data() + member.train.y.size());
    const Eigen::VectorXd logp = member.kernel.all_log_params();
    m["kernel_log_params"] = std::vector<double>(logp.data(), logp.data() + logp.size());
    m["noise_sigma_sq"] = member.noise.sigma_sq;
    m["noise_fixed"] = member.noise.fixed;
    members.push_back(std::move(m));
  }
  j["members"] = std::move(members);

  std::ofstream out(path);
  if (!out) throw InputError("save_model: cannot open " + path.string() + " for writing");
  out << j.dump(1) << "\n";
  if (!out) throw InputError("save_model: write failed for " + path.string());
}

EnsembleModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("load_model: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("model archive: invalid JSON in " + path.string() + ": " + e.what());
  }

  try {
    if (j.at("format").get<std::string>() != "gpbag-model")
      throw ParseError("model archive: unrecognized format tag");
    if (j.at("version").get<int>() != archive_version)
      throw ParseError("model archive: unsupported version " +
                       std::to_string(j.at("version").get<int>()));

    EnsembleModel model;
    const json& cfg = j.at("config");
    model.config.estimators = cfg.at("estimators").get<int>();
    model.config.subset_size = cfg.at("subset_size").get<std::size_t>();
    model.config.with_replacement = cfg.at("with_replacement").get<bool>();
    model.config.combination = combination_from_name(cfg.at("combination").get<std::string>());
    model.config.standardize = cfg.at("standardize").get<bool>();
    model.config.seed = cfg.at("seed").get<std::uint64_t>();
    model.kernel_text = j.at("kernel").get<std::string>();
    model.scaler = scaler_from_json(j.at("scaler"));

    const KernelSpec tmpl = parse_kernel(model.kernel_text);
    for (const json& m : j.at("members")) {
      const auto rows = m.at("x").get<std::vector<std::vector<double>>>();
      if (rows.empty()) throw ParseError("model archive: member with no training rows");
      const std::size_t dim = rows.front().size();
      if (dim == 0) throw ParseError("model archive: member with zero-width rows");
      Dataset subset;
      subset.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != dim) throw ParseError("model archive: ragged member rows");
        for (std::size_t c = 0; c < dim; ++c)
          subset.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
      const auto yv = m.at("y").get<std::vector<double>>();
      if (yv.size() != rows.size())
        throw ParseError("model archive: member y length mismatch");
      subset.y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));

      const auto logp = m.at("kernel_log_params").get<std::vector<double>>();
      KernelSpec kernel = tmpl.bound_to(static_cast<Eigen::Index>(dim));
      kernel = kernel.with_all_log_params(Eigen::Map<const Eigen::VectorXd>(
          logp.data(), static_cast<Eigen::Index>(logp.size())));

      NoiseSpec noise;
      noise.sigma_sq = m.at("noise_sigma_sq").get<double>();
      noise.fixed = m.at("noise_fixed").get<bool>();

      model.members.push_back(fit_exact(subset, kernel, noise));
    }
    if (model.members.empty()) throw ParseError("model archive: no members");
    if (model.scaler.dim() != model.members.front().train.dim())
      throw ParseError("model archive: scaler and member dimensionality disagree");
    return model;
  } catch (const json::exception& e) {
    throw ParseError("model archive: missing or mistyped field in " + path.string() + ": " +
                     e.what());
  }
}

}  // namespace gpbag
