#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gpbag/errors.hpp"

namespace gpbag {

enum class BaseKind { RBF, Linear, WhiteNoise, Bias, Cosine, BrownianMotion, PeriodicMatern32 };
enum class NodeKind { Base, Sum, Product };

const char* kind_name(BaseKind kind);
bool kind_has_lengthscales(BaseKind kind);  // RBF, Cosine, PeriodicMatern32
bool kind_has_period(BaseKind kind);        // PeriodicMatern32

enum class ParamKind { Variance, Lengthscale, Period };

struct ParamInfo {
  std::string name;        // e.g. "k0.rbf.ell1"
  ParamKind kind;
  Eigen::Index column;     // dataset column a lengthscale belongs to, -1 otherwise
};

// A composition tree of parameterized base kernels. Sum and product nodes
// hold two or more children; leaves hold one base kernel with strictly
// positive hyperparameters. Values are immutable: reparameterization returns
// a new tree.
//
// A spec starts out unbound (no input dimensionality). bound_to(d) resolves
// active columns against d and sizes any lengthscale vectors, after which the
// spec can evaluate kernels and Gram matrices.
class KernelSpec {
 public:
  KernelSpec() = default;  // unbound rbf leaf

  // Leaves with default hyperparameters (all 1), sized at bind time.
  static KernelSpec base(BaseKind kind, std::vector<Eigen::Index> active_dims = {});

  // Leaves with explicit hyperparameters. Lengthscale vectors may be left
  // empty to default to 1 per active column at bind time.
  static KernelSpec rbf(double variance, Eigen::VectorXd lengthscales = {},
                        std::vector<Eigen::Index> active_dims = {});
  static KernelSpec linear(double variance, std::vector<Eigen::Index> active_dims = {});
  static KernelSpec white_noise(double variance, std::vector<Eigen::Index> active_dims = {});
  static KernelSpec bias(double variance);
  static KernelSpec cosine(double variance, Eigen::VectorXd lengthscales = {},
                           std::vector<Eigen::Index> active_dims = {});
  static KernelSpec brownian_motion(double variance, std::vector<Eigen::Index> active_dims = {});
  static KernelSpec periodic_matern32(double variance, Eigen::VectorXd lengthscales = {},
                                      double period = 1.0,
                                      std::vector<Eigen::Index> active_dims = {});

  static KernelSpec sum(std::vector<KernelSpec> children);
  static KernelSpec product(std::vector<KernelSpec> children);

  NodeKind node() const { return node_; }
  BaseKind base_kind() const;
  const std::vector<KernelSpec>& children() const;

  bool bound() const { return input_dim_ > 0; }
  Eigen::Index input_dim() const { return input_dim_; }

  // Active columns as stored (empty means "all columns").
  const std::vector<Eigen::Index>& declared_dims() const { return dims_; }
  // Active columns after binding.
  std::vector<Eigen::Index> resolved_dims() const;

  // Resolves column restrictions against an input dimensionality and sizes
  // hyperparameter vectors. Throws InputError on out-of-range columns,
  // mismatched lengthscale sizes, or a multi-column Brownian leaf.
  KernelSpec bound_to(Eigen::Index input_dim) const;

  // Leaf hyperparameters.
  double variance() const;
  const Eigen::VectorXd& lengthscales() const;
  double period() const;

  // Fixed subtrees keep their hyperparameters out of the free-parameter
  // vector (and thus out of optimization).
  bool fixed() const { return fixed_; }
  KernelSpec with_fixed(bool fixed) const;

  // Flattened hyperparameter access in a stable order: leaves first-to-last,
  // and per leaf variance, lengthscales, then period. The "free" variants
  // skip fixed subtrees; the "all" variants include them.
  std::vector<ParamInfo> free_param_info() const;
  std::vector<std::string> free_param_names() const;
  Eigen::Index free_param_count() const;
  Eigen::VectorXd free_log_params() const;
  KernelSpec with_free_log_params(const Eigen::VectorXd& log_params) const;

  std::vector<std::string> all_param_names() const;
  Eigen::VectorXd all_log_params() const;
  KernelSpec with_all_log_params(const Eigen::VectorXd& log_params) const;

 private:
  NodeKind node_ = NodeKind::Base;
  BaseKind base_ = BaseKind::RBF;
  double variance_ = 1.0;
  Eigen::VectorXd lengthscales_;  // sized at bind time for ARD kinds
  double period_ = 1.0;
  std::vector<Eigen::Index> dims_;  // empty = all columns
  bool fixed_ = false;
  Eigen::Index input_dim_ = 0;  // 0 = unbound
  std::vector<KernelSpec> children_;

  friend class KernelAccess;
};

// k(x1, x2) for a bound spec. Vector sizes must equal the bound input
// dimensionality.
double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x1, const Eigen::VectorXd& x2);

// Symmetric Gram matrix K(X, X). Symmetry is exact by construction: the
// lower triangle is computed once and mirrored, never averaged.
Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X);

// Cross-covariance K(X1, X2), rows of X1 against rows of X2.
Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2);

// diag(K(X, X)) without forming the full matrix.
Eigen::VectorXd gram_diagonal(const KernelSpec& spec, const Eigen::MatrixXd& X);

// dK/d(log theta) for every free hyperparameter, aligned with
// free_param_names(). Each matrix is exactly symmetric.
struct GramGradient {
  std::string param;
  Eigen::MatrixXd d_gram;
};
std::vector<GramGradient> gram_gradients(const KernelSpec& spec, const Eigen::MatrixXd& X);

// Infix kernel expressions: leaves by name ("rbf", "linear", "white",
// "bias", "cosine", "brownian", "periodicmatern32"), composition with
// + and *, grouping with parentheses, and column restriction with a
// [cols=i,j,...] suffix (0-based) on a leaf or group. Example:
//   "rbf + (linear * rbf)[cols=7]"
KernelSpec parse_kernel(const std::string& text);

// Canonical text form; parse_kernel(format_kernel(s)) reproduces the
// structure (hyperparameter values are not part of the text).
std::string format_kernel(const KernelSpec& spec);

}  // namespace gpbag
