#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "gpbag/errors.hpp"

namespace gpbag {

// Per-column affine transform z = (x - mean) / scale, plus the matching
// response transform. Columns with zero spread keep scale 1 so constant
// features pass through unharmed.
struct Standardizer {
  Eigen::VectorXd x_mean;
  Eigen::VectorXd x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;

  static Standardizer identity(Eigen::Index dim);
  static Standardizer fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

  // Transform equivalent to applying `first` and then `second`.
  static Standardizer compose(const Standardizer& first, const Standardizer& second);

  bool is_identity() const;
  Eigen::Index dim() const { return x_mean.size(); }

  Eigen::MatrixXd apply_x(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd apply_y(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd invert_x(const Eigen::MatrixXd& Z) const;
  Eigen::VectorXd invert_y(const Eigen::VectorXd& z) const;

  double restore_mean(double standardized_mean) const {
    return standardized_mean * y_scale + y_mean;
  }
  double restore_variance(double standardized_variance) const {
    return standardized_variance * y_scale * y_scale;
  }
};

// Feature matrix (one row per observation) with its response vector and a
// record of any transform already applied relative to the original units.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Standardizer applied;  // identity when X, y are in original units

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

// Throws InputError on shape mismatch, empty data, or non-finite entries.
void validate(const Dataset& data);

// Fits a standardizer on `raw`, applies it, and records the composed
// transform on the result.
Dataset standardized(const Dataset& raw);

Dataset subset_rows(const Dataset& data, const std::vector<std::size_t>& rows);

}  // namespace gpbag
