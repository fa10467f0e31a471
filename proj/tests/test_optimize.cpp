#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gpbag/gpbag.hpp"
#include "oracles.hpp"

using namespace gpbag;

namespace {

// Concave quadratic with maximum at `center` and per-coordinate curvatures.
Objective quadratic(const Eigen::VectorXd& center, const Eigen::VectorXd& curvature) {
  return [center, curvature](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const Eigen::VectorXd diff = x - center;
    if (grad) *grad = -curvature.cwiseProduct(diff);
    return -0.5 * diff.dot(curvature.cwiseProduct(diff));
  };
}

// Draws y ~ GP(0, rbf(variance, ell)) at X plus iid observation noise.
Eigen::VectorXd gp_sample(const Eigen::MatrixXd& X, double variance, double ell,
                          double noise_sd, std::mt19937_64& rng) {
  const KernelSpec k =
      KernelSpec::rbf(variance, Eigen::VectorXd::Constant(1, ell)).bound_to(X.cols());
  Eigen::MatrixXd K = gram(k, X);
  K.diagonal().array() += 1e-10;
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(K).matrixL();
  Eigen::VectorXd z(X.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
  Eigen::VectorXd y = L * z;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise_sd * standard_normal(rng);
  return y;
}

double kernel_param(const GPModel& model, const std::string& name) {
  const auto names = model.kernel.free_param_names();
  const Eigen::VectorXd logs = model.kernel.free_log_params();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return std::exp(logs(static_cast<Eigen::Index>(i)));
  FAIL("no parameter named ", name);
  return 0.0;
}

}  // namespace

TEST_CASE("quadratic maximum is found quickly") {
  Eigen::VectorXd center(2), curvature(2);
  center << 3.0, -1.5;
  curvature << 1.0, 40.0;  // badly scaled on purpose
  OptimizerConfig config;
  config.max_iterations = 50;
  const OptimizeResult res = maximize(quadratic(center, curvature), Eigen::VectorXd::Zero(2), config);
  CHECK(res.converged);
  CHECK(res.iterations <= 50);
  CHECK((res.x - center).norm() < 1e-5);
  CHECK(res.value == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("trace is monotone non-decreasing") {
  Eigen::VectorXd center(3), curvature(3);
  center << 1.0, 2.0, -3.0;
  curvature << 1.0, 5.0, 0.2;
  const OptimizeResult res = maximize(quadratic(center, curvature), Eigen::VectorXd::Zero(3), {});
  REQUIRE(res.trace.size() >= 2);
  for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] >= res.trace[i - 1]);
  CHECK(res.trace.back() == res.value);
}

TEST_CASE("different starts reach the same optimum") {
  Eigen::VectorXd center(1), curvature(1);
  center << 2.0;
  curvature << 3.0;
  const Objective f = quadratic(center, curvature);
  const OptimizeResult a = maximize(f, Eigen::VectorXd::Constant(1, -5.0), {});
  const OptimizeResult b = maximize(f, Eigen::VectorXd::Constant(1, 7.0), {});
  CHECK(std::abs(a.value - b.value) < 1e-6);
  CHECK(std::abs(a.x(0) - b.x(0)) < 1e-6);
}

TEST_CASE("iterates stay inside the box and stop at an active bound") {
  // Linear objective: the maximum over the box sits at the upper bound.
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad = Eigen::VectorXd::Ones(x.size());
    return x.sum();
  };
  OptimizerConfig config;
  config.log_lower_bound = -2.0;
  config.log_upper_bound = 2.0;
  const OptimizeResult res = maximize(f, Eigen::VectorXd::Zero(2), config);
  CHECK(res.converged);  // projected gradient vanishes at the bound
  CHECK(res.x(0) == doctest::Approx(2.0));
  CHECK(res.x(1) == doctest::Approx(2.0));
}

TEST_CASE("non-finite starting objective is reported, not looped on") {
  const Objective f = [](const Eigen::VectorXd&, Eigen::VectorXd*) {
    return -std::numeric_limits<double>::infinity();
  };
  const OptimizeResult res = maximize(f, Eigen::VectorXd::Zero(1), {});
  CHECK_FALSE(res.converged);
  CHECK(res.value == -std::numeric_limits<double>::infinity());
}

TEST_CASE("fit recovers the lengthscale of the generating process") {
  auto rng = make_engine(31, 0);
  Eigen::MatrixXd X(200, 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, 0) = uniform_real(rng, -10.0, 10.0);
  Dataset data;
  data.X = X;
  data.y = gp_sample(X, 1.0, 2.0, 0.1, rng);

  OptimizerConfig config;
  config.restarts = 2;
  config.seed = 11;
  const GPModel model = fit_gp(data, parse_kernel("rbf"), config);
  const double ell = kernel_param(model, "k0.rbf.ell0");
  CHECK(ell > 1.5);
  CHECK(ell < 2.7);
}

TEST_CASE("pure noise is absorbed by the noise-like parameters") {
  auto rng = make_engine(32, 0);
  Dataset data;
  data.X = oracles::random_matrix(rng, 80, 1);
  data.y = Eigen::VectorXd(80);
  for (Eigen::Index i = 0; i < 80; ++i) data.y(i) = standard_normal(rng);
  const double var_y = (data.y.array() - data.y.mean()).square().mean();

  OptimizerConfig config;
  config.restarts = 2;
  config.seed = 7;
  const GPModel model = fit_gp(data, parse_kernel("rbf + white"), config);
  const double absorbed = model.noise.sigma_sq + kernel_param(model, "k1.whitenoise.variance");
  CHECK(absorbed >= 0.8 * var_y);
  CHECK(absorbed <= 1.5 * var_y);
}

TEST_CASE("fitted parameters respect the log-space box") {
  auto rng = make_engine(33, 0);
  Dataset data;
  data.X = oracles::random_matrix(rng, 40, 2);
  data.y = oracles::random_vector(rng, 40);

  OptimizerConfig config;
  config.restarts = 1;
  config.log_lower_bound = -2.0;
  config.log_upper_bound = 2.0;
  const GPModel model = fit_gp(data, parse_kernel("rbf + bias"), config);
  const Eigen::VectorXd logs = model.kernel.free_log_params();
  for (Eigen::Index i = 0; i < logs.size(); ++i) {
    CHECK(logs(i) >= -2.0 - 1e-12);
    CHECK(logs(i) <= 2.0 + 1e-12);
  }
  CHECK(std::log(model.noise.sigma_sq) >= -2.0 - 1e-12);
  CHECK(std::log(model.noise.sigma_sq) <= 2.0 + 1e-12);
}

TEST_CASE("fitting is reproducible for a fixed seed") {
  auto rng = make_engine(34, 0);
  Dataset data;
  data.X = oracles::random_matrix(rng, 35, 2);
  data.y = oracles::random_vector(rng, 35);

  OptimizerConfig config;
  config.restarts = 2;
  config.seed = 99;
  const GPModel a = fit_gp(data, parse_kernel("rbf"), config);
  const GPModel b = fit_gp(data, parse_kernel("rbf"), config);
  CHECK(a.kernel.free_log_params() == b.kernel.free_log_params());
  CHECK(a.noise.sigma_sq == b.noise.sigma_sq);
}

TEST_CASE("the template as given is never beaten by nothing") {
  // Handing fit a template must return a model at least as good as the
  // template itself, even with zero iterations allowed.
  auto rng = make_engine(35, 0);
  Dataset data;
  data.X = oracles::random_matrix(rng, 30, 1);
  data.y = oracles::random_vector(rng, 30);

  const KernelSpec tmpl = KernelSpec::rbf(0.7, Eigen::VectorXd::Constant(1, 1.3));
  const NoiseSpec noise{0.2, false};
  const double template_value =
      log_marginal_likelihood(fit_exact(data, tmpl.bound_to(1), noise));

  OptimizerConfig config;
  config.restarts = 0;
  config.max_iterations = 1;
  const GPModel model = fit_gp(data, tmpl, config, noise);
  CHECK(log_marginal_likelihood(model) >= template_value - 1e-9);
}

TEST_CASE("fixed noise is left untouched") {
  auto rng = make_engine(36, 0);
  Dataset data;
  data.X = oracles::random_matrix(rng, 25, 1);
  data.y = oracles::random_vector(rng, 25);

  OptimizerConfig config;
  config.restarts = 1;
  const GPModel model = fit_gp(data, parse_kernel("rbf"), config, NoiseSpec{0.123, true});
  CHECK(model.noise.sigma_sq == 0.123);
  CHECK(model.noise.fixed);
}

TEST_CASE("fitting improves the marginal likelihood over the heuristic start") {
  auto rng = make_engine(37, 0);
  Eigen::MatrixXd X(50, 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, 0) = uniform_real(rng, -4.0, 4.0);
  Dataset data;
  data.X = X;
  data.y = gp_sample(X, 2.0, 0.8, 0.1, rng);

  // With no restarts the longer run retraces the shorter run's steps, so its
  // final value can only be at least as good.
  OptimizerConfig few;
  few.restarts = 0;
  few.max_iterations = 1;
  OptimizerConfig many;
  many.restarts = 0;
  many.max_iterations = 100;
  const double before = log_marginal_likelihood(fit_gp(data, parse_kernel("rbf"), few));
  const double after = log_marginal_likelihood(fit_gp(data, parse_kernel("rbf"), many));
  CHECK(after >= before);
  CHECK(after > before + 1.0);  // on GP-shaped data tuning must actually help
}
