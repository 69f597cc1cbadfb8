#pragma once

#include <vector>

#include "difftest/types.hpp"

namespace difftest {

/// A set of smoothing bandwidths, increasing. Sets built by build_set are
/// geometric (h_k = a h_{k+1}); tabulated presets are close to geometric but
/// taken verbatim, so ratio() reports the geometric-mean ratio.
struct BandwidthSet {
  std::vector<double> values;  // strictly increasing, positive

  BandwidthSet() = default;
  explicit BandwidthSet(std::vector<double> v);
  static BandwidthSet single(double h) { return BandwidthSet({h}); }

  int size() const { return static_cast<int>(values.size()); }
  double ratio() const;  // geometric-mean of h_k/h_{k+1}; 1 when J = 1
  bool is_geometric(double tol = 1e-12) const;
};

enum class BandwidthScheme { FixedSet, CvLowerRange, RefThirdSmallest, Endpoints };

/// Reference-rule bandwidth s_hat * n^{-1/6} (bivariate normal reference with
/// a common scale for both coordinates). n is the number of pairs.
double scott_rule(const ObservedPath& path);

/// Least-squares cross-validation for the conditional kernel density, with a
/// 1-lag block around the left-out pair. Returns the minimizer over h_grid.
/// The integrated-square term is computed exactly through the kernel
/// convolution K2.
double cv_select(const ObservedPath& path, const std::vector<double>& h_grid);

double cv_criterion(const ObservedPath& path, double h);

/// Geometric grid around cv_select's value, for CLI use.
std::vector<double> default_cv_grid(const ObservedPath& path);

/// Builds the geometric set:
///   CvLowerRange      anchor at position 2 of J, ratio a
///   RefThirdSmallest  anchor at position 3 of J, ratio a
///   Endpoints         anchor = h_1, terminal = h_J, a = (h1/hJ)^{1/(J-1)}
BandwidthSet build_set(double anchor, BandwidthScheme scheme, int J, double a,
                       double terminal = 0.0);

}  // namespace difftest
