#include "gpbag/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>
#include <utility>

namespace gpbag {

namespace {

constexpr double sqrt3 = std::numbers::sqrt3;

void check_positive(double value, const char* what) {
  if (!std::isfinite(value) || value <= 0.0)
    throw InputError(std::string("kernel: ") + what + " must be a positive finite number");
}

void check_lengthscales(const Eigen::VectorXd& ell) {
  for (Eigen::Index i = 0; i < ell.size(); ++i) check_positive(ell(i), "lengthscale");
}

void check_dims(const std::vector<Eigen::Index>& dims) {
  for (Eigen::Index d : dims) {
    if (d < 0) throw InputError("kernel: active column indices must be non-negative");
  }
}

}  // namespace

const char* kind_name(BaseKind kind) {
  switch (kind) {
    case BaseKind::RBF: return "rbf";
    case BaseKind::Linear: return "linear";
    case BaseKind::WhiteNoise: return "whitenoise";
    case BaseKind::Bias: return "bias";
    case BaseKind::Cosine: return "cosine";
    case BaseKind::BrownianMotion: return "brownianmotion";
    case BaseKind::PeriodicMatern32: return "periodicmatern32";
  }
  throw InputError("kernel: unknown base kind");
}

bool kind_has_lengthscales(BaseKind kind) {
  return kind == BaseKind::RBF || kind == BaseKind::Cosine || kind == BaseKind::PeriodicMatern32;
}

bool kind_has_period(BaseKind kind) { return kind == BaseKind::PeriodicMatern32; }

KernelSpec KernelSpec::base(BaseKind kind, std::vector<Eigen::Index> active_dims) {
  check_dims(active_dims);
  KernelSpec s;
  s.node_ = NodeKind::Base;
  s.base_ = kind;
  s.dims_ = std::move(active_dims);
  return s;
}

KernelSpec KernelSpec::rbf(double variance, Eigen::VectorXd lengthscales,
                           std::vector<Eigen::Index> active_dims) {
  check_positive(variance, "variance");
  check_lengthscales(lengthscales);
  KernelSpec s = base(BaseKind::RBF, std::move(active_dims));
  s.variance_ = variance;
  s.lengthscales_ = std::move(lengthscales);
  return s;
}

KernelSpec KernelSpec::linear(double variance, std::vector<Eigen::Index> active_dims) {
  check_positive(variance, "variance");
  KernelSpec s = base(BaseKind::Linear, std::move(active_dims));
  s.variance_ = variance;
  return s;
}

KernelSpec KernelSpec::white_noise(double variance, std::vector<Eigen::Index> active_dims) {
  check_positive(variance, "variance");
  KernelSpec s = base(BaseKind::WhiteNoise, std::move(active_dims));
  s.variance_ = variance;
  return s;
}

KernelSpec KernelSpec::bias(double variance) {
  check_positive(variance, "variance");
  KernelSpec s = base(BaseKind::Bias);
  s.variance_ = variance;
  return s;
}

KernelSpec KernelSpec::cosine(double variance, Eigen::VectorXd lengthscales,
                              std::vector<Eigen::Index> active_dims) {
  check_positive(variance, "variance");
  check_lengthscales(lengthscales);
  KernelSpec s = base(BaseKind::Cosine, std::move(active_dims));
  s.variance_ = variance;
  s.lengthscales_ = std::move(lengthscales);
  return s;
}

KernelSpec KernelSpec::brownian_motion(double variance, std::vector<Eigen::Index> active_dims) {
  check_positive(variance, "variance");
  KernelSpec s = base(BaseKind::BrownianMotion, std::move(active_dims));
  s.variance_ = variance;
  return s;
}

KernelSpec KernelSpec::periodic_matern32(double variance, Eigen::VectorXd lengthscales,
                                         double period, std::vector<Eigen::Index> active_dims) {
  check_positive(variance, "variance");
  check_lengthscales(lengthscales);
  check_positive(period, "period");
  KernelSpec s = base(BaseKind::PeriodicMatern32, std::move(active_dims));
  s.variance_ = variance;
  s.lengthscales_ = std::move(lengthscales);
  s.period_ = period;
  return s;
}

KernelSpec KernelSpec::sum(std::vector<KernelSpec> children) {
  if (children.size() < 2) throw InputError("kernel sum: needs at least two children");
  KernelSpec s;
  s.node_ = NodeKind::Sum;
  s.children_ = std::move(children);
  return s;
}

KernelSpec KernelSpec::product(std::vector<KernelSpec> children) {
  if (children.size() < 2) throw InputError("kernel product: needs at least two children");
  KernelSpec s;
  s.node_ = NodeKind::Product;
  s.children_ = std::move(children);
  return s;
}

BaseKind KernelSpec::base_kind() const {
  if (node_ != NodeKind::Base) throw InputError("kernel: base_kind() on a composite node");
  return base_;
}

const std::vector<KernelSpec>& KernelSpec::children() const { return children_; }

std::vector<Eigen::Index> KernelSpec::resolved_dims() const {
  if (!bound()) throw InputError("kernel: resolved_dims() on an unbound spec");
  if (!dims_.empty()) return dims_;
  std::vector<Eigen::Index> all(static_cast<std::size_t>(input_dim_));
  for (Eigen::Index i = 0; i < input_dim_; ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

KernelSpec KernelSpec::bound_to(Eigen::Index input_dim) const {
  if (input_dim <= 0) throw InputError("kernel bind: input dimensionality must be positive");
  KernelSpec out = *this;
  auto walk = [&](auto&& self, KernelSpec& s) -> void {
    s.input_dim_ = input_dim;
    std::set<Eigen::Index> seen;
    for (Eigen::Index d : s.dims_) {
      if (d >= input_dim)
        throw InputError("kernel bind: active column " + std::to_string(d) +
                         " out of range for " + std::to_string(input_dim) + " input columns");
      if (!seen.insert(d).second)
        throw InputError("kernel bind: duplicate active column " + std::to_string(d));
    }
    if (s.node_ != NodeKind::Base) {
      for (auto& c : s.children_) self(self, c);
      return;
    }
    const auto count = static_cast<Eigen::Index>(s.resolved_dims().size());
    if (s.base_ == BaseKind::BrownianMotion && count != 1)
      throw InputError("kernel bind: brownianmotion needs exactly one active column");
    if (kind_has_lengthscales(s.base_)) {
      if (s.lengthscales_.size() == 0) {
        s.lengthscales_ = Eigen::VectorXd::Ones(count);
      } else if (s.lengthscales_.size() != count) {
        throw InputError("kernel bind: " + std::string(kind_name(s.base_)) + " has " +
                         std::to_string(s.lengthscales_.size()) + " lengthscales for " +
                         std::to_string(count) + " active columns");
      }
    }
  };
  walk(walk, out);
  return out;
}

double KernelSpec::variance() const {
  if (node_ != NodeKind::Base) throw InputError("kernel: variance() on a composite node");
  return variance_;
}

const Eigen::VectorXd& KernelSpec::lengthscales() const {
  if (node_ != NodeKind::Base || !kind_has_lengthscales(base_))
    throw InputError("kernel: lengthscales() on a node without lengthscales");
  return lengthscales_;
}

double KernelSpec::period() const {
  if (node_ != NodeKind::Base || !kind_has_period(base_))
    throw InputError("kernel: period() on a node without a period");
  return period_;
}

KernelSpec KernelSpec::with_fixed(bool fixed) const {
  KernelSpec out = *this;
  out.fixed_ = fixed;
  return out;
}

std::vector<ParamInfo> KernelSpec::free_param_info() const {
  if (!bound()) throw InputError("kernel params: spec is unbound");
  std::vector<ParamInfo> out;
  int leaf = 0;
  auto walk = [&](auto&& self, const KernelSpec& s, bool fixed_ctx) -> void {
    const bool fx = fixed_ctx || s.fixed_;
    if (s.node_ != NodeKind::Base) {
      for (const auto& c : s.children_) self(self, c, fx);
      return;
    }
    const int idx = leaf++;
    if (fx) return;
    const std::string prefix = "k" + std::to_string(idx) + "." + kind_name(s.base_);
    out.push_back({prefix + ".variance", ParamKind::Variance, -1});
    if (kind_has_lengthscales(s.base_)) {
      const auto dims = s.resolved_dims();
      for (std::size_t j = 0; j < dims.size(); ++j)
        out.push_back({prefix + ".ell" + std::to_string(j), ParamKind::Lengthscale, dims[j]});
    }
    if (kind_has_period(s.base_)) out.push_back({prefix + ".period", ParamKind::Period, -1});
  };
  walk(walk, *this, false);
  return out;
}

std::vector<std::string> KernelSpec::free_param_names() const {
  std::vector<std::string> names;
  for (const auto& info : free_param_info()) names.push_back(info.name);
  return names;
}

Eigen::Index KernelSpec::free_param_count() const {
  return static_cast<Eigen::Index>(free_param_info().size());
}

Eigen::VectorXd KernelSpec::free_log_params() const {
  if (!bound()) throw InputError("kernel params: spec is unbound");
  std::vector<double> vals;
  auto walk = [&](auto&& self, const KernelSpec& s, bool fixed_ctx) -> void {
    const bool fx = fixed_ctx || s.fixed_;
    if (s.node_ != NodeKind::Base) {
      for (const auto& c : s.children_) self(self, c, fx);
      return;
    }
    if (fx) return;
    vals.push_back(std::log(s.variance_));
    if (kind_has_lengthscales(s.base_))
      for (Eigen::Index j = 0; j < s.lengthscales_.size(); ++j)
        vals.push_back(std::log(s.lengthscales_(j)));
    if (kind_has_period(s.base_)) vals.push_back(std::log(s.period_));
  };
  walk(walk, *this, false);
  if (vals.empty()) return Eigen::VectorXd();
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

KernelSpec KernelSpec::with_free_log_params(const Eigen::VectorXd& log_params) const {
  if (!bound()) throw InputError("kernel params: spec is unbound");
  if (!log_params.allFinite()) throw InputError("kernel params: non-finite log-parameter");
  if (log_params.size() != free_param_count())
    throw InputError("kernel params: expected " + std::to_string(free_param_count()) +
                     " values, got " + std::to_string(log_params.size()));
  KernelSpec out = *this;
  Eigen::Index pos = 0;
  auto walk = [&](auto&& self, KernelSpec& s, bool fixed_ctx) -> void {
    const bool fx = fixed_ctx || s.fixed_;
    if (s.node_ != NodeKind::Base) {
      for (auto& c : s.children_) self(self, c, fx);
      return;
    }
    if (fx) return;
    s.variance_ = std::exp(log_params(pos++));
    if (kind_has_lengthscales(s.base_))
      for (Eigen::Index j = 0; j < s.lengthscales_.size(); ++j)
        s.lengthscales_(j) = std::exp(log_params(pos++));
    if (kind_has_period(s.base_)) s.period_ = std::exp(log_params(pos++));
  };
  walk(walk, out, false);
  return out;
}

std::vector<std::string> KernelSpec::all_param_names() const {
  if (!bound()) throw InputError("kernel params: spec is unbound");
  std::vector<std::string> out;
  int leaf = 0;
  auto walk = [&](auto&& self, const KernelSpec& s) -> void {
    if (s.node_ != NodeKind::Base) {
      for (const auto& c : s.children_) self(self, c);
      return;
    }
    const std::string prefix = "k" + std::to_string(leaf++) + "." + kind_name(s.base_);
    out.push_back(prefix + ".variance");
    if (kind_has_lengthscales(s.base_)) {
      for (Eigen::Index j = 0; j < s.lengthscales_.size(); ++j)
        out.push_back(prefix + ".ell" + std::to_string(j));
    }
    if (kind_has_period(s.base_)) out.push_back(prefix + ".period");
  };
  walk(walk, *this);
  return out;
}

Eigen::VectorXd KernelSpec::all_log_params() const {
  if (!bound()) throw InputError("kernel params: spec is unbound");
  std::vector<double> vals;
  auto walk = [&](auto&& self, const KernelSpec& s) -> void {
    if (s.node_ != NodeKind::Base) {
      for (const auto& c : s.children_) self(self, c);
      return;
    }
    vals.push_back(std::log(s.variance_));
    if (kind_has_lengthscales(s.base_))
      for (Eigen::Index j = 0; j < s.lengthscales_.size(); ++j)
        vals.push_back(std::log(s.lengthscales_(j)));
    if (kind_has_period(s.base_)) vals.push_back(std::log(s.period_));
  };
  walk(walk, *this);
  if (vals.empty()) return Eigen::VectorXd();
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

KernelSpec KernelSpec::with_all_log_params(const Eigen::VectorXd& log_params) const {
  if (!bound()) throw InputError("kernel params: spec is unbound");
  if (!log_params.allFinite()) throw InputError("kernel params: non-finite log-parameter");
  if (log_params.size() != all_log_params().size())
    throw InputError("kernel params: expected " + std::to_string(all_log_params().size()) +
                     " values, got " + std::to_string(log_params.size()));
  KernelSpec out = *this;
  Eigen::Index pos = 0;
  auto walk = [&](auto&& self, KernelSpec& s) -> void {
    if (s.node_ != NodeKind::Base) {
      for (auto& c : s.children_) self(self, c);
      return;
    }
    s.variance_ = std::exp(log_params(pos++));
    if (kind_has_lengthscales(s.base_))
      for (Eigen::Index j = 0; j < s.lengthscales_.size(); ++j)
        s.lengthscales_(j) = std::exp(log_params(pos++));
    if (kind_has_period(s.base_)) s.period_ = std::exp(log_params(pos++));
  };
  walk(walk, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& dims) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(dims.size()));
  for (std::size_t j = 0; j < dims.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(dims[j]);
  return out;
}

// Copies the computed lower triangle onto the upper one, making symmetry
// exact without averaging.
void mirror_lower(Eigen::MatrixXd& K) {
  const Eigen::Index n = K.rows();
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) K(i, j) = K(j, i);
}

Eigen::MatrixXd outer_difference(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return u.replicate(1, v.size()) - v.transpose().replicate(u.size(), 1);
}

Eigen::MatrixXd scaled_sq_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   const Eigen::VectorXd& ell) {
  const Eigen::MatrixXd As = A.array().rowwise() / ell.transpose().array();
  const Eigen::MatrixXd Bs = B.array().rowwise() / ell.transpose().array();
  const Eigen::VectorXd an = As.rowwise().squaredNorm();
  const Eigen::VectorXd bn = Bs.rowwise().squaredNorm();
  Eigen::MatrixXd D = an.replicate(1, B.rows()) + bn.transpose().replicate(A.rows(), 1) -
                      2.0 * (As * Bs.transpose());
  return D.cwiseMax(0.0);
}

Eigen::MatrixXd base_cross(const KernelSpec& leaf, const Eigen::MatrixXd& X1,
                           const Eigen::MatrixXd& X2) {
  const auto dims = leaf.resolved_dims();
  const Eigen::MatrixXd A = select_columns(X1, dims);
  const Eigen::MatrixXd B = select_columns(X2, dims);
  const double v = leaf.variance();
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.rows();

  switch (leaf.base_kind()) {
    case BaseKind::RBF: {
      const Eigen::MatrixXd D = scaled_sq_distance(A, B, leaf.lengthscales());
      return v * (-0.5 * D.array()).exp().matrix();
    }
    case BaseKind::Linear:
      return v * (A * B.transpose());
    case BaseKind::WhiteNoise: {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, m);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
          if (A.row(i) == B.row(j)) K(i, j) = v;
      return K;
    }
    case BaseKind::Bias:
      return Eigen::MatrixXd::Constant(n, m, v);
    case BaseKind::Cosine: {
      const Eigen::VectorXd w = leaf.lengthscales().cwiseInverse();
      const Eigen::MatrixXd S = outer_difference(A * w, B * w);
      return v * S.array().cos().matrix();
    }
    case BaseKind::BrownianMotion: {
      // Two-sided Wiener covariance: matching signs contribute
      // min(|x1|, |x2|), opposite signs are independent.
      const Eigen::VectorXd u1 = A.col(0);
      const Eigen::VectorXd u2 = B.col(0);
      const Eigen::MatrixXd M = u1.cwiseAbs().replicate(1, m) +
                                u2.cwiseAbs().transpose().replicate(n, 1) -
                                outer_difference(u1, u2).cwiseAbs();
      return 0.5 * v * M;
    }
    case BaseKind::PeriodicMatern32: {
      const Eigen::VectorXd& ell = leaf.lengthscales();
      const double p = leaf.period();
      Eigen::ArrayXXd acc = Eigen::ArrayXXd::Zero(n, m);
      for (Eigen::Index j = 0; j < A.cols(); ++j) {
        const Eigen::MatrixXd D = outer_difference(A.col(j), B.col(j));
        acc += ((std::numbers::pi / p) * D.array()).sin().square() / (ell(j) * ell(j));
      }
      const Eigen::ArrayXXd r = acc.sqrt();
      return (v * (1.0 + sqrt3 * r) * (-sqrt3 * r).exp()).matrix();
    }
  }
  throw InputError("kernel: unknown base kind");
}

Eigen::MatrixXd gram_rec(const KernelSpec& s, const Eigen::MatrixXd& X1,
                         const Eigen::MatrixXd& X2, bool symmetric) {
  switch (s.node()) {
    case NodeKind::Base: {
      Eigen::MatrixXd K = base_cross(s, X1, X2);
      if (symmetric) mirror_lower(K);
      return K;
    }
    case NodeKind::Sum: {
      Eigen::MatrixXd K = gram_rec(s.children()[0], X1, X2, symmetric);
      for (std::size_t c = 1; c < s.children().size(); ++c)
        K += gram_rec(s.children()[c], X1, X2, symmetric);
      return K;
    }
    case NodeKind::Product: {
      Eigen::MatrixXd K = gram_rec(s.children()[0], X1, X2, symmetric);
      for (std::size_t c = 1; c < s.children().size(); ++c)
        K = K.cwiseProduct(gram_rec(s.children()[c], X1, X2, symmetric));
      return K;
    }
  }
  throw InputError("kernel: unknown node kind");
}

Eigen::VectorXd diag_rec(const KernelSpec& s, const Eigen::MatrixXd& X) {
  switch (s.node()) {
    case NodeKind::Base: {
      const auto dims = s.resolved_dims();
      const double v = s.variance();
      switch (s.base_kind()) {
        case BaseKind::Linear: {
          const Eigen::MatrixXd A = select_columns(X, dims);
          return v * A.rowwise().squaredNorm();
        }
        case BaseKind::BrownianMotion:
          return v * X.col(dims[0]).cwiseAbs();
        default:
          return Eigen::VectorXd::Constant(X.rows(), v);
      }
    }
    case NodeKind::Sum: {
      Eigen::VectorXd d = diag_rec(s.children()[0], X);
      for (std::size_t c = 1; c < s.children().size(); ++c) d += diag_rec(s.children()[c], X);
      return d;
    }
    case NodeKind::Product: {
      Eigen::VectorXd d = diag_rec(s.children()[0], X);
      for (std::size_t c = 1; c < s.children().size(); ++c)
        d = d.cwiseProduct(diag_rec(s.children()[c], X));
      return d;
    }
  }
  throw InputError("kernel: unknown node kind");
}

struct EvalGrads {
  Eigen::MatrixXd K;
  std::vector<Eigen::MatrixXd> grads;  // aligned with the subtree's free params
};

EvalGrads base_grads(const KernelSpec& leaf, const Eigen::MatrixXd& X, bool fixed_ctx) {
  EvalGrads out;
  out.K = base_cross(leaf, X, X);
  mirror_lower(out.K);
  if (fixed_ctx) return out;

  // Every kind's value is linear in its variance, so d/d(log variance) = K.
  out.grads.push_back(out.K);

  const auto dims = leaf.resolved_dims();
  const double v = leaf.variance();
  switch (leaf.base_kind()) {
    case BaseKind::RBF: {
      const Eigen::VectorXd& ell = leaf.lengthscales();
      for (std::size_t j = 0; j < dims.size(); ++j) {
        Eigen::MatrixXd M =
            (outer_difference(X.col(dims[j]), X.col(dims[j])) / ell(static_cast<Eigen::Index>(j)))
                .array()
                .square()
                .matrix();
        mirror_lower(M);
        out.grads.push_back(out.K.cwiseProduct(M));
      }
      break;
    }
    case BaseKind::Cosine: {
      const Eigen::VectorXd& ell = leaf.lengthscales();
      const Eigen::VectorXd w = ell.cwiseInverse();
      const Eigen::MatrixXd A = select_columns(X, dims);
      const Eigen::MatrixXd S = outer_difference(A * w, A * w);
      const Eigen::MatrixXd sinS = S.array().sin().matrix();
      for (std::size_t j = 0; j < dims.size(); ++j) {
        Eigen::MatrixXd G =
            v * sinS.cwiseProduct(outer_difference(X.col(dims[j]), X.col(dims[j]))) /
            ell(static_cast<Eigen::Index>(j));
        mirror_lower(G);
        out.grads.push_back(std::move(G));
      }
      break;
    }
    case BaseKind::PeriodicMatern32: {
      const Eigen::VectorXd& ell = leaf.lengthscales();
      const double p = leaf.period();
      const Eigen::Index n = X.rows();
      std::vector<Eigen::MatrixXd> D(dims.size());
      Eigen::ArrayXXd acc = Eigen::ArrayXXd::Zero(n, n);
      for (std::size_t j = 0; j < dims.size(); ++j) {
        D[j] = outer_difference(X.col(dims[j]), X.col(dims[j]));
        acc += ((std::numbers::pi / p) * D[j].array()).sin().square() /
               (ell(static_cast<Eigen::Index>(j)) * ell(static_cast<Eigen::Index>(j)));
      }
      const Eigen::ArrayXXd r = acc.sqrt();
      const Eigen::ArrayXXd envelope = 3.0 * v * (-sqrt3 * r).exp();
      for (std::size_t j = 0; j < dims.size(); ++j) {
        const double lj = ell(static_cast<Eigen::Index>(j));
        const Eigen::ArrayXXd U = ((std::numbers::pi / p) * D[j].array()).sin() / lj;
        Eigen::MatrixXd G = (envelope * U.square()).matrix();
        mirror_lower(G);
        out.grads.push_back(std::move(G));
      }
      Eigen::ArrayXXd period_sum = Eigen::ArrayXXd::Zero(n, n);
      for (std::size_t j = 0; j < dims.size(); ++j) {
        const double lj = ell(static_cast<Eigen::Index>(j));
        const Eigen::ArrayXXd angle = (std::numbers::pi / p) * D[j].array();
        period_sum += D[j].array() * angle.sin() * angle.cos() / (lj * lj);
      }
      Eigen::MatrixXd G = (envelope * (std::numbers::pi / p) * period_sum).matrix();
      mirror_lower(G);
      out.grads.push_back(std::move(G));
      break;
    }
    default:
      break;  // variance is the only hyperparameter
  }
  return out;
}

EvalGrads grads_rec(const KernelSpec& s, const Eigen::MatrixXd& X, bool fixed_ctx) {
  const bool fx = fixed_ctx || s.fixed();
  if (s.node() == NodeKind::Base) return base_grads(s, X, fx);

  std::vector<EvalGrads> parts;
  parts.reserve(s.children().size());
  for (const auto& c : s.children()) parts.push_back(grads_rec(c, X, fx));

  EvalGrads out;
  if (s.node() == NodeKind::Sum) {
    out.K = parts[0].K;
    for (std::size_t c = 1; c < parts.size(); ++c) out.K += parts[c].K;
    for (auto& part : parts)
      for (auto& g : part.grads) out.grads.push_back(std::move(g));
    return out;
  }

  // Product: each child's gradient is scaled by the product of the others.
  const std::size_t nc = parts.size();
  std::vector<Eigen::MatrixXd> prefix(nc), suffix(nc);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(X.rows(), X.rows());
  for (std::size_t c = 0; c < nc; ++c) {
    prefix[c] = acc;
    acc = acc.cwiseProduct(parts[c].K);
  }
  out.K = acc;
  acc = Eigen::MatrixXd::Ones(X.rows(), X.rows());
  for (std::size_t c = nc; c-- > 0;) {
    suffix[c] = acc;
    acc = acc.cwiseProduct(parts[c].K);
  }
  for (std::size_t c = 0; c < nc; ++c) {
    const Eigen::MatrixXd scale = prefix[c].cwiseProduct(suffix[c]);
    for (auto& g : parts[c].grads) out.grads.push_back(g.cwiseProduct(scale));
  }
  return out;
}

void check_eval_ready(const KernelSpec& s, Eigen::Index cols, const char* what) {
  if (!s.bound()) throw InputError(std::string(what) + ": kernel spec is unbound");
  if (cols != s.input_dim())
    throw InputError(std::string(what) + ": input has " + std::to_string(cols) +
                     " columns, kernel is bound to " + std::to_string(s.input_dim()));
}

}  // namespace

double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) {
  check_eval_ready(spec, x1.size(), "eval_kernel");
  if (x1.size() != x2.size()) throw InputError("eval_kernel: input sizes differ");
  return gram_rec(spec, x1.transpose(), x2.transpose(), false)(0, 0);
}

Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  check_eval_ready(spec, X.cols(), "gram");
  return gram_rec(spec, X, X, true);
}

Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X1,
                     const Eigen::MatrixXd& X2) {
  check_eval_ready(spec, X1.cols(), "gram");
  if (X1.cols() != X2.cols()) throw InputError("gram: inputs have different column counts");
  return gram_rec(spec, X1, X2, false);
}

Eigen::VectorXd gram_diagonal(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  check_eval_ready(spec, X.cols(), "gram_diagonal");
  return diag_rec(spec, X);
}

std::vector<GramGradient> gram_gradients(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  check_eval_ready(spec, X.cols(), "gram_gradients");
  EvalGrads eg = grads_rec(spec, X, false);
  const auto info = spec.free_param_info();
  if (info.size() != eg.grads.size())
    throw NumericalError("gram_gradients: parameter walk mismatch");
  std::vector<GramGradient> out;
  out.reserve(info.size());
  for (std::size_t i = 0; i < info.size(); ++i)
    out.push_back({info[i].name, std::move(eg.grads[i])});
  return out;
}

// ---------------------------------------------------------------------------
// Grammar
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum Kind { Ident, Number, Plus, Star, LParen, RParen, LBracket, RBracket, Equals, Comma, End };
  Kind kind;
  std::string text;
  std::size_t pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= text_.size()) {
      current_ = {Token::End, "", start};
      return;
    }
    const char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      current_ = {Token::Ident, text_.substr(start, pos_ - start), start};
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      current_ = {Token::Number, text_.substr(start, pos_ - start), start};
      return;
    }
    ++pos_;
    switch (c) {
      case '+': current_ = {Token::Plus, "+", start}; return;
      case '*': current_ = {Token::Star, "*", start}; return;
      case '(': current_ = {Token::LParen, "(", start}; return;
      case ')': current_ = {Token::RParen, ")", start}; return;
      case '[': current_ = {Token::LBracket, "[", start}; return;
      case ']': current_ = {Token::RBracket, "]", start}; return;
      case '=': current_ = {Token::Equals, "=", start}; return;
      case ',': current_ = {Token::Comma, ",", start}; return;
      default:
        throw ParseError("kernel expression: unexpected character '" + std::string(1, c) +
                         "' at position " + std::to_string(start));
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  Token current_{Token::End, "", 0};
};

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

BaseKind kind_from_name(const std::string& name, std::size_t pos) {
  const std::string n = lowercase(name);
  if (n == "rbf") return BaseKind::RBF;
  if (n == "linear") return BaseKind::Linear;
  if (n == "white" || n == "whitenoise" || n == "white_noise") return BaseKind::WhiteNoise;
  if (n == "bias") return BaseKind::Bias;
  if (n == "cosine") return BaseKind::Cosine;
  if (n == "brownian" || n == "brownianmotion" || n == "brownian_motion")
    return BaseKind::BrownianMotion;
  if (n == "periodicmatern32" || n == "periodic_matern32") return BaseKind::PeriodicMatern32;
  throw ParseError("kernel expression: unknown kernel '" + name + "' at position " +
                   std::to_string(pos) +
                   " (known: rbf, linear, white, bias, cosine, brownian, periodicmatern32)");
}

// Applies a [cols=...] group restriction to every leaf that has no explicit
// restriction of its own.
KernelSpec restrict_columns(const KernelSpec& s, const std::vector<Eigen::Index>& dims) {
  if (s.node() == NodeKind::Base) {
    if (!s.declared_dims().empty()) return s;
    KernelSpec out = KernelSpec::base(s.base_kind(), dims);
    return out;
  }
  std::vector<KernelSpec> children;
  for (const auto& c : s.children()) children.push_back(restrict_columns(c, dims));
  return s.node() == NodeKind::Sum ? KernelSpec::sum(std::move(children))
                                   : KernelSpec::product(std::move(children));
}

class Parser {
 public:
  explicit Parser(const std::string& text) : lexer_(text) {}

  KernelSpec parse() {
    KernelSpec result = parse_sum();
    const Token& t = lexer_.peek();
    if (t.kind != Token::End)
      throw ParseError("kernel expression: unexpected '" + t.text + "' at position " +
                       std::to_string(t.pos));
    return result;
  }

 private:
  KernelSpec parse_sum() {
    std::vector<KernelSpec> terms;
    terms.push_back(parse_product());
    while (lexer_.peek().kind == Token::Plus) {
      lexer_.take();
      terms.push_back(parse_product());
    }
    if (terms.size() == 1) return std::move(terms[0]);
    return KernelSpec::sum(std::move(terms));
  }

  KernelSpec parse_product() {
    std::vector<KernelSpec> factors;
    factors.push_back(parse_factor());
    while (lexer_.peek().kind == Token::Star) {
      lexer_.take();
      factors.push_back(parse_factor());
    }
    if (factors.size() == 1) return std::move(factors[0]);
    return KernelSpec::product(std::move(factors));
  }

  KernelSpec parse_factor() {
    KernelSpec s = parse_primary();
    while (lexer_.peek().kind == Token::LBracket) s = restrict_columns(s, parse_cols());
    return s;
  }

  KernelSpec parse_primary() {
    const Token t = lexer_.take();
    if (t.kind == Token::Ident) return KernelSpec::base(kind_from_name(t.text, t.pos));
    if (t.kind == Token::LParen) {
      KernelSpec inner = parse_sum();
      expect(Token::RParen, ")");
      return inner;
    }
    throw ParseError("kernel expression: expected a kernel name or '(' at position " +
                     std::to_string(t.pos));
  }

  std::vector<Eigen::Index> parse_cols() {
    expect(Token::LBracket, "[");
    const Token key = lexer_.take();
    if (key.kind != Token::Ident || lowercase(key.text) != "cols")
      throw ParseError("kernel expression: expected 'cols' at position " +
                       std::to_string(key.pos));
    expect(Token::Equals, "=");
    std::vector<Eigen::Index> dims;
    dims.push_back(parse_column_index());
    while (lexer_.peek().kind == Token::Comma) {
      lexer_.take();
      dims.push_back(parse_column_index());
    }
    expect(Token::RBracket, "]");
    return dims;
  }

  Eigen::Index parse_column_index() {
    const Token t = lexer_.take();
    if (t.kind != Token::Number)
      throw ParseError("kernel expression: expected a column index at position " +
                       std::to_string(t.pos));
    return static_cast<Eigen::Index>(std::stoll(t.text));
  }

  void expect(Token::Kind kind, const char* what) {
    const Token t = lexer_.take();
    if (t.kind != kind)
      throw ParseError("kernel expression: expected '" + std::string(what) + "' at position " +
                       std::to_string(t.pos));
  }

  Lexer lexer_;
};

std::string format_rec(const KernelSpec& s, const NodeKind* parent) {
  if (s.node() == NodeKind::Base) {
    std::string out = kind_name(s.base_kind());
    const auto& dims = s.declared_dims();
    if (!dims.empty()) {
      out += "[cols=";
      for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(dims[i]);
      }
      out += "]";
    }
    return out;
  }
  const bool is_sum = s.node() == NodeKind::Sum;
  const char* joiner = is_sum ? " + " : " * ";
  const NodeKind own = s.node();
  std::string out;
  for (std::size_t i = 0; i < s.children().size(); ++i) {
    if (i) out += joiner;
    out += format_rec(s.children()[i], &own);
  }
  // Parentheses preserve the exact tree shape: only a product child under a
  // sum can go bare.
  const bool bare = parent == nullptr || (*parent == NodeKind::Sum && !is_sum);
  return bare ? out : "(" + out + ")";
}

}  // namespace

KernelSpec parse_kernel(const std::string& text) { return Parser(text).parse(); }

std::string format_kernel(const KernelSpec& spec) { return format_rec(spec, nullptr); }

}  // namespace gpbag
