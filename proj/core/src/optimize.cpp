#include "gpbag/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "gpbag/rng.hpp"

namespace gpbag {

namespace {

constexpr double armijo_c1 = 1e-4;
constexpr int lbfgs_memory = 8;
constexpr int max_backtracks = 60;
constexpr double neg_inf = -std::numeric_limits<double>::infinity();

void check_config(const OptimizerConfig& cfg) {
  if (cfg.restarts < 0) throw InputError("optimizer: restarts must be non-negative");
  if (cfg.max_iterations < 1) throw InputError("optimizer: max_iterations must be positive");
  if (!(cfg.grad_tolerance > 0.0)) throw InputError("optimizer: grad_tolerance must be positive");
  if (!std::isfinite(cfg.log_lower_bound) || !std::isfinite(cfg.log_upper_bound) ||
      cfg.log_lower_bound >= cfg.log_upper_bound)
    throw InputError("optimizer: bounds must be finite with lower < upper");
}

struct Pair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

// Two-loop recursion: approximate (Hessian of -f)^-1 applied to the ascent
// gradient, yielding an ascent direction.
Eigen::VectorXd lbfgs_direction(const std::deque<Pair>& history, const Eigen::VectorXd& grad) {
  Eigen::VectorXd q = grad;
  std::vector<double> a(history.size());
  for (std::size_t i = history.size(); i-- > 0;) {
    a[i] = history[i].rho * history[i].s.dot(q);
    q -= a[i] * history[i].y;
  }
  if (!history.empty()) {
    const Pair& last = history.back();
    const double yy = last.y.squaredNorm();
    if (yy > 0.0) q *= last.s.dot(last.y) / yy;
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double b = history[i].rho * history[i].y.dot(q);
    q += (a[i] - b) * history[i].s;
  }
  return q;
}

// Gradient components that point out of the box at an active bound are
// zeroed; the rest is the ascent direction still available.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                                   double lo, double hi) {
  Eigen::VectorXd pg = grad;
  const double edge = 1e-12 * (hi - lo);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) <= lo + edge && grad(i) < 0.0) pg(i) = 0.0;
    if (x(i) >= hi - edge && grad(i) > 0.0) pg(i) = 0.0;
  }
  return pg;
}

}  // namespace

OptimizeResult maximize(const Objective& objective, const Eigen::VectorXd& x0,
                        const OptimizerConfig& cfg) {
  check_config(cfg);
  const double lo = cfg.log_lower_bound;
  const double hi = cfg.log_upper_bound;
  const Eigen::Index n = x0.size();
  auto clamp = [&](Eigen::VectorXd v) { return v.cwiseMax(lo).cwiseMin(hi); };

  OptimizeResult res;
  res.x = clamp(x0);

  Eigen::VectorXd grad(n);
  double fx = objective(res.x, &grad);
  res.value = fx;
  res.trace.push_back(fx);
  if (!std::isfinite(fx) || !grad.allFinite()) {
    res.grad_norm = std::numeric_limits<double>::infinity();
    return res;  // unusable start; caller decides what to do
  }

  Eigen::VectorXd x = res.x;
  std::deque<Pair> history;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    const Eigen::VectorXd pg = projected_gradient(x, grad, lo, hi);
    res.grad_norm = pg.norm();
    if (res.grad_norm <= cfg.grad_tolerance) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd direction = lbfgs_direction(history, grad);
    if (!direction.allFinite() || direction.dot(grad) <= 0.0) direction = grad;

    bool accepted = false;
    double t = 1.0;
    for (int bt = 0; bt < max_backtracks; ++bt, t *= 0.5) {
      const Eigen::VectorXd x_new = clamp(x + t * direction);
      const Eigen::VectorXd step = x_new - x;
      if (step.squaredNorm() == 0.0) continue;  // fully pinned at the bounds
      const double ascent = grad.dot(step);
      if (ascent <= 0.0) continue;  // projection turned it non-ascending

      Eigen::VectorXd grad_new(n);
      const double f_new = objective(x_new, &grad_new);
      if (!std::isfinite(f_new) || !grad_new.allFinite()) continue;
      if (f_new < fx + armijo_c1 * ascent) continue;

      const Eigen::VectorXd y_diff = grad_new - grad;
      const double sy = step.dot(y_diff);
      // Maximization: curvature pairs use the descent convention on -f.
      if (-sy > 1e-10 * step.norm() * y_diff.norm()) {
        history.push_back({step, -y_diff, 1.0 / (-sy)});
        if (history.size() > static_cast<std::size_t>(lbfgs_memory)) history.pop_front();
      }
      x = x_new;
      fx = f_new;
      grad = grad_new;
      accepted = true;
      break;
    }

    res.iterations = iter;
    if (!accepted) break;  // line search exhausted; stationary for our purposes
    res.trace.push_back(fx);
    res.x = x;
    res.value = fx;
  }

  res.x = x;
  res.value = fx;
  res.grad_norm = projected_gradient(x, grad, lo, hi).norm();
  if (res.grad_norm <= cfg.grad_tolerance) res.converged = true;
  return res;
}

namespace {

// Heuristic starting point in log space: variances at var(y), lengthscales at
// the matching column's SD, periods at the mean column SD, noise at
// 0.1 * var(y).
Eigen::VectorXd heuristic_start(const Dataset& data, const KernelSpec& kernel, bool free_noise) {
  const double n = static_cast<double>(data.size());
  const double y_mean = data.y.mean();
  double y_var = (data.y.array() - y_mean).square().sum() / n;
  if (!(y_var > 0.0)) y_var = 1.0;

  const Eigen::VectorXd col_mean = data.X.colwise().mean().transpose();
  Eigen::VectorXd col_sd =
      ((data.X.rowwise() - col_mean.transpose()).colwise().squaredNorm() / n)
          .cwiseSqrt()
          .transpose();
  double sd_sum = 0.0;
  for (Eigen::Index j = 0; j < col_sd.size(); ++j) {
    if (!(col_sd(j) > 0.0)) col_sd(j) = 1.0;
    sd_sum += col_sd(j);
  }
  const double mean_sd = sd_sum / static_cast<double>(col_sd.size());

  const auto info = kernel.free_param_info();
  Eigen::VectorXd start(static_cast<Eigen::Index>(info.size()) + (free_noise ? 1 : 0));
  for (std::size_t i = 0; i < info.size(); ++i) {
    double value = 1.0;
    switch (info[i].kind) {
      case ParamKind::Variance: value = y_var; break;
      case ParamKind::Lengthscale: value = col_sd(info[i].column); break;
      case ParamKind::Period: value = mean_sd; break;
    }
    start(static_cast<Eigen::Index>(i)) = std::log(value);
  }
  if (free_noise) start(start.size() - 1) = std::log(0.1 * y_var);
  return start;
}

}  // namespace

GPModel fit_gp(const Dataset& data, const KernelSpec& kernel_template,
               const OptimizerConfig& config, std::optional<NoiseSpec> noise) {
  check_config(config);
  validate(data);
  const KernelSpec tmpl =
      kernel_template.bound() ? kernel_template : kernel_template.bound_to(data.dim());
  if (tmpl.input_dim() != data.dim())
    throw InputError("fit_gp: kernel bound to " + std::to_string(tmpl.input_dim()) +
                     " columns, data has " + std::to_string(data.dim()));

  NoiseSpec noise_spec;
  if (noise.has_value()) {
    noise_spec = *noise;
  } else {
    const double y_mean = data.y.mean();
    double y_var = (data.y.array() - y_mean).square().sum() / static_cast<double>(data.size());
    if (!(y_var > 0.0)) y_var = 1.0;
    noise_spec.sigma_sq = 0.1 * y_var;
    noise_spec.fixed = false;
  }
  // A zero noise variance has no log-space coordinate to optimize; treat it
  // as fixed so the gradient layout stays consistent.
  if (noise_spec.sigma_sq == 0.0) noise_spec.fixed = true;
  const bool free_noise = !noise_spec.fixed;

  const Eigen::Index n_kernel = tmpl.free_param_count();
  const Eigen::Index n_params = n_kernel + (free_noise ? 1 : 0);
  if (n_params == 0) return fit_exact(data, tmpl, noise_spec);

  auto model_at = [&](const Eigen::VectorXd& p) {
    const KernelSpec k = tmpl.with_free_log_params(p.head(n_kernel));
    NoiseSpec ns = noise_spec;
    if (free_noise) ns.sigma_sq = std::exp(p(n_kernel));
    return fit_exact(data, k, ns);
  };

  auto objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) -> double {
    try {
      const GPModel m = model_at(p);
      if (grad) *grad = lml_gradient(m);
      return log_marginal_likelihood(m);
    } catch (const NumericalError&) {
      if (grad) grad->setZero(p.size());
      return neg_inf;
    }
  };

  auto clamp = [&](Eigen::VectorXd v) {
    return v.cwiseMax(config.log_lower_bound).cwiseMin(config.log_upper_bound);
  };

  // Candidate 0: the template's hyperparameters exactly as given, so the
  // result never scores below the starting spec.
  Eigen::VectorXd best_x(n_params);
  best_x.head(n_kernel) = tmpl.free_log_params();
  if (free_noise) best_x(n_kernel) = std::log(noise_spec.sigma_sq);
  double best_value = objective(best_x, nullptr);

  const Eigen::VectorXd start = heuristic_start(data, tmpl, free_noise);
  bool any_usable = std::isfinite(best_value);
  for (int r = 0; r <= config.restarts; ++r) {
    Eigen::VectorXd x0 = start;
    if (r > 0) {
      auto rng = make_engine(config.seed, static_cast<std::uint64_t>(r));
      for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) += uniform_real(rng, -1.0, 1.0);
    }
    const OptimizeResult run = maximize(objective, clamp(x0), config);
    if (!std::isfinite(run.value)) continue;
    any_usable = true;
    if (run.value > best_value + 1e-9) {  // ties keep the earliest candidate
      best_value = run.value;
      best_x = run.x;
    }
  }
  if (!any_usable)
    throw NumericalError("fit_gp: every restart failed factorization or scored -inf");

  return model_at(best_x);
}

}  // namespace gpbag
