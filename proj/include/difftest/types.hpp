#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace difftest {

using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;
using Matrix = Eigen::MatrixXd;

/// Invalid inputs, parameters or configuration. CLI exit code 2.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerical failures (non-convergence, divergent integrals, ...). CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Constraint target outside the convex hull of the local kernel values.
struct ConvexHullError : NumericError {
  using NumericError::NumericError;
};

/// Equally spaced observations X_1..X_{n+1} with sampling interval delta (years).
struct ObservedPath {
  Array values;            // length n+1
  double delta = 0.0;      // years between observations
  long clamp_count = 0;    // Euler excursions clamped at the positivity floor

  int n() const { return static_cast<int>(values.size()) - 1; }
};

/// Throws DomainError unless the path has >= 3 finite values, delta > 0 and,
/// when require_positive, all values > 0.
void validate_path(const ObservedPath& path, bool require_positive);

}  // namespace difftest
