#include "gpbag/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gpbag {

namespace {

constexpr double jitter_start_factor = 1e-8;
constexpr double jitter_cap_factor = 1e-2;

void check_noise(const NoiseSpec& noise) {
  if (!std::isfinite(noise.sigma_sq) || noise.sigma_sq < 0.0)
    throw InputError("gp: noise variance must be finite and non-negative");
}

}  // namespace

GPModel fit_exact(const Dataset& data, const KernelSpec& kernel, const NoiseSpec& noise) {
  validate(data);
  check_noise(noise);
  const KernelSpec bound = kernel.bound() ? kernel : kernel.bound_to(data.dim());
  if (bound.input_dim() != data.dim())
    throw InputError("gp: kernel bound to " + std::to_string(bound.input_dim()) +
                     " columns, data has " + std::to_string(data.dim()));

  const Eigen::Index n = data.size();
  Eigen::MatrixXd K = gram(bound, data.X);
  K.diagonal().array() += noise.sigma_sq;
  if (!K.allFinite())
    throw NumericalError("gp: covariance matrix has non-finite entries");

  const double scale = K.diagonal().mean();
  const double base = scale > 0.0 ? scale : 1.0;
  const double cap = jitter_cap_factor * base;

  GPModel model;
  model.train = data;
  model.kernel = bound;
  model.noise = noise;

  std::vector<double> attempted;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (double jitter = jitter_start_factor * base; jitter <= cap * (1.0 + 1e-12); jitter *= 10.0) {
    attempted.push_back(jitter);
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    llt.compute(Kj);
    if (llt.info() == Eigen::Success) {
      model.jitter = jitter;
      model.chol_lower = llt.matrixL();
      model.alpha = llt.solve(data.y);
      return model;
    }
  }

  std::ostringstream msg;
  msg << "gp: Cholesky factorization failed for n=" << n << "; attempted jitters:";
  for (double j : attempted) msg << " " << j;
  throw NumericalError(msg.str());
}

std::vector<Prediction> predict(const GPModel& model, const Eigen::MatrixXd& X_star,
                                const PredictOptions& options) {
  if (X_star.cols() != model.train.dim())
    throw InputError("gp predict: input has " + std::to_string(X_star.cols()) +
                     " columns, model was trained on " + std::to_string(model.train.dim()));
  const Eigen::Index m = X_star.rows();
  std::vector<Prediction> out(static_cast<std::size_t>(m));
  if (m == 0) return out;

  const auto lower = model.chol_lower.triangularView<Eigen::Lower>();
  constexpr Eigen::Index block = 4096;
  for (Eigen::Index start = 0; start < m; start += block) {
    const Eigen::Index count = std::min(block, m - start);
    const Eigen::MatrixXd Xb = X_star.middleRows(start, count);
    const Eigen::MatrixXd Kx = gram(model.kernel, model.train.X, Xb);  // n x count
    const Eigen::VectorXd mean = Kx.transpose() * model.alpha;
    const Eigen::MatrixXd V = lower.solve(Kx);
    const Eigen::VectorXd prior = gram_diagonal(model.kernel, Xb);
    for (Eigen::Index i = 0; i < count; ++i) {
      Prediction& p = out[static_cast<std::size_t>(start + i)];
      p.mean = mean(i);
      double var = prior(i) - V.col(i).squaredNorm();
      if (var < 0.0) {
        var = 0.0;
        p.variance_clipped = true;
      }
      if (options.include_observation_noise) var += model.noise.sigma_sq;
      p.variance = var;
    }
  }
  return out;
}

double log_marginal_likelihood(const GPModel& model) {
  const Eigen::Index n = model.train.size();
  const double fit_term = -0.5 * model.train.y.dot(model.alpha);
  const double logdet_term = -model.chol_lower.diagonal().array().log().sum();
  const double norm_term = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return fit_term + logdet_term + norm_term;
}

Eigen::VectorXd lml_gradient(const GPModel& model) {
  const Eigen::Index n = model.train.size();
  const auto lower = model.chol_lower.triangularView<Eigen::Lower>();

  // Kinv via two triangular solves against the identity.
  Eigen::MatrixXd Kinv = Eigen::MatrixXd::Identity(n, n);
  lower.solveInPlace(Kinv);
  model.chol_lower.transpose().triangularView<Eigen::Upper>().solveInPlace(Kinv);

  const auto grads = gram_gradients(model.kernel, model.train.X);
  const bool free_noise = !model.noise.fixed;
  Eigen::VectorXd out(static_cast<Eigen::Index>(grads.size()) + (free_noise ? 1 : 0));

  // dL/d(log theta) = 0.5 * (alpha^T G alpha - tr(Kinv G))
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const Eigen::MatrixXd& G = grads[i].d_gram;
    const double data_term = model.alpha.dot(G * model.alpha);
    const double trace_term = Kinv.cwiseProduct(G).sum();
    out(static_cast<Eigen::Index>(i)) = 0.5 * (data_term - trace_term);
  }
  if (free_noise) {
    // d(K + sigma_n^2 I)/d(log sigma_n^2) = sigma_n^2 I
    const double s = model.noise.sigma_sq;
    out(out.size() - 1) = 0.5 * s * (model.alpha.squaredNorm() - Kinv.trace());
  }
  return out;
}

std::vector<std::string> gradient_param_names(const GPModel& model) {
  std::vector<std::string> names = model.kernel.free_param_names();
  if (!model.noise.fixed) names.push_back("noise.sigma_sq");
  return names;
}

}  // namespace gpbag
