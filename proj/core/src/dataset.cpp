#include "gpbag/dataset.hpp"

#include <cmath>

namespace gpbag {

Standardizer Standardizer::identity(Eigen::Index dim) {
  Standardizer s;
  s.x_mean = Eigen::VectorXd::Zero(dim);
  s.x_scale = Eigen::VectorXd::Ones(dim);
  return s;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw InputError("standardizer: X rows and y size differ");
  if (X.rows() == 0) throw InputError("standardizer: cannot fit on empty data");
  const double n = static_cast<double>(X.rows());

  Standardizer s;
  s.x_mean = X.colwise().mean().transpose();
  s.x_scale = ((X.rowwise() - s.x_mean.transpose()).colwise().squaredNorm() / n)
                  .cwiseSqrt()
                  .transpose();
  for (Eigen::Index j = 0; j < s.x_scale.size(); ++j) {
    if (!(s.x_scale(j) > 0.0)) s.x_scale(j) = 1.0;
  }
  s.y_mean = y.mean();
  const double y_var = (y.array() - s.y_mean).square().sum() / n;
  s.y_scale = y_var > 0.0 ? std::sqrt(y_var) : 1.0;
  return s;
}

Standardizer Standardizer::compose(const Standardizer& first, const Standardizer& second) {
  // A default-constructed (dimension 0) standardizer acts as the identity.
  const Standardizer a = first.dim() == 0 ? identity(second.dim()) : first;
  const Standardizer b = second.dim() == 0 ? identity(a.dim()) : second;
  if (a.dim() != b.dim()) throw InputError("standardizer compose: dimension mismatch");
  // z = ((x - m1)/s1 - m2)/s2 = (x - (m1 + m2 s1)) / (s1 s2)
  Standardizer s;
  s.x_mean = a.x_mean + b.x_mean.cwiseProduct(a.x_scale);
  s.x_scale = a.x_scale.cwiseProduct(b.x_scale);
  s.y_mean = a.y_mean + b.y_mean * a.y_scale;
  s.y_scale = a.y_scale * b.y_scale;
  return s;
}

bool Standardizer::is_identity() const {
  return x_mean.isZero(0.0) && (x_scale.array() == 1.0).all() && y_mean == 0.0 && y_scale == 1.0;
}

Eigen::MatrixXd Standardizer::apply_x(const Eigen::MatrixXd& X) const {
  if (dim() == 0) return X;
  if (X.cols() != dim()) throw InputError("standardizer: column count mismatch");
  return (X.rowwise() - x_mean.transpose()).array().rowwise() / x_scale.transpose().array();
}

Eigen::VectorXd Standardizer::apply_y(const Eigen::VectorXd& y) const {
  return (y.array() - y_mean) / y_scale;
}

Eigen::MatrixXd Standardizer::invert_x(const Eigen::MatrixXd& Z) const {
  if (dim() == 0) return Z;
  if (Z.cols() != dim()) throw InputError("standardizer: column count mismatch");
  return (Z.array().rowwise() * x_scale.transpose().array()).rowwise() + x_mean.transpose().array();
}

Eigen::VectorXd Standardizer::invert_y(const Eigen::VectorXd& z) const {
  return z.array() * y_scale + y_mean;
}

void validate(const Dataset& data) {
  if (data.X.rows() == 0) throw InputError("dataset: no rows");
  if (data.X.cols() == 0) throw InputError("dataset: no feature columns");
  if (data.X.rows() != data.y.size()) throw InputError("dataset: X rows and y size differ");
  if (!data.X.allFinite()) throw InputError("dataset: non-finite feature value");
  if (!data.y.allFinite()) throw InputError("dataset: non-finite response value");
}

Dataset standardized(const Dataset& raw) {
  const Standardizer s = Standardizer::fit(raw.X, raw.y);
  Dataset out;
  out.X = s.apply_x(raw.X);
  out.y = s.apply_y(raw.y);
  out.applied = Standardizer::compose(raw.applied, s);
  return out;
}

Dataset subset_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(data.X.rows()))
      throw InputError("subset_rows: row index out of range");
    out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(static_cast<Eigen::Index>(rows[i]));
    out.y(static_cast<Eigen::Index>(i)) = data.y(static_cast<Eigen::Index>(rows[i]));
  }
  out.applied = data.applied;
  return out;
}

}  // namespace gpbag
