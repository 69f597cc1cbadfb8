#pragma once

#include <functional>
#include <utility>

#include "difftest/types.hpp"

namespace difftest {

/// Biweight kernel (15/16)(1-u^2)^2 on [-1,1].
double biweight(double u);

/// K_h(u) = K(u/h)/h.
double kh(double u, double h);

// Kernel functionals. All are exact: the integrands are piecewise
// polynomials, integrated with Gauss-Legendre rules of sufficient order.
double kernel_r();                        // R(K) = int K^2 = 5/7
double kernel_sigma2();                   // int u^2 K(u) du = 1/7
double kernel_conv(double z, double c);   // K2(z,c) = int K(u) K(z+cu) du, c > 0
double kernel_conv_moment(double t);      // MK2(t) = int u K(u) K(t+u) du
double kernel_k4_zero();                  // int { K2(v,1) }^2 dv
double kernel_nu(double t);               // int {K2(tu,t)}^2 du * int {K2(v,t)}^2 dv

/// Kernel estimator of the stationary density: mean of K_h(x - X_t) over all
/// observations.
double stationary_kde(const Array& values, double h, double x);

/// Kernel estimator of the transitional density p(y|x) from consecutive
/// pairs. Throws NumericError when the stationary estimate at x vanishes.
double transition_kde(const ObservedPath& path, double h, double x, double y);

struct LocalLinearDiag {
  bool nadaraya_fallback = false;
};

/// Local linear weights at y over all observations. Reproduces constants and
/// linear functions: sum w = 1, sum w (y - X_t) = 0. Falls back to
/// Nadaraya-Watson weights on a degenerate window; throws NumericError when
/// no observation lies within h of y.
Array local_linear_weights(const Array& values, double h, double y,
                           LocalLinearDiag* diag = nullptr);

/// Double-smoothed parametric transitional density (local-linear smooth of
/// p_theta(X_s|X_t) in the first index, kernel smooth in the second).
/// density(y_to, x_from) evaluates p_theta(y_to | x_from). When no
/// observation lies within h of y the smooth cannot be formed and the raw
/// parametric density enters the outer kernel average instead; evidence at
/// such points then counts against the model rather than vanishing.
double smoothed_param_density(const ObservedPath& path, double h,
                              const std::function<double(double, double)>& density,
                              double x, double y);

/// Precomputed machinery for repeated smoothed-density evaluations on one
/// path with one parametric transition density: sorted observations, the
/// matrix p_theta(X_j|X_i) over all observation pairs, and consecutive pairs
/// ordered by their first coordinate. This is the hot-loop backend shared by
/// the test statistic and the bootstrap.
class PathKernelCache {
 public:
  PathKernelCache(const ObservedPath& path,
                  const std::function<double(double, double)>& density_y_given_x);

  /// Ordering-only variant: no parametric density matrix (kernel-only use).
  explicit PathKernelCache(const ObservedPath& path);

  int n() const { return n_; }
  const Array& sorted_values() const { return xs_; }

  /// Half-open range [lo,hi) of sorted-observation indices with |p - xs_i| < h.
  std::pair<int, int> window(double p, double h) const;

  double pi_hat(double x, double h) const;
  double transition_kde_at(double x, double y, double h) const;
  /// Kernel joint density n^{-1} sum_t K_h(x-X_t) K_h(y-X_{t+1}).
  double joint_kde_at(double x, double y, double h) const;

  struct Smoothed {
    double p_tilde = 0.0;       // p~_theta(y|x); NaN when no x-mass
    double target_joint = 0.0;  // p~_theta(y|x) * pi_hat(x), always finite
    double pi_hat = 0.0;
    bool ll_fallback = false;   // Nadaraya-Watson weights used at y
    bool raw_fallback = false;  // empty y-window: raw parametric density used
  };
  /// Requires a parametric density at construction.
  Smoothed smoothed_at(double x, double y, double h) const;

  /// Kernel products K_h(x-X_t) K_h(y-X_{t+1}) over the consecutive pairs with
  /// both factors nonzero; appended to `out`. Returns the count of all pairs.
  int active_pair_products(double x, double y, double h,
                           std::vector<double>& out) const;

 private:
  void init_order(const ObservedPath& path);
  /// Local-linear (or fallback) weights on the window around y; returns the
  /// window and fills w (compact, size hi-lo).
  std::pair<int, int> ll_weights(double y, double h, std::vector<double>& w,
                                 bool* fallback) const;

  int n_ = 0;
  double delta_ = 0.0;
  std::function<double(double, double)> density_;
  Array xs_;                          // sorted observations, length n+1
  Array pair_x_, pair_y_;             // consecutive pairs sorted by first coord
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p_;
  bool has_density_ = false;
};

}  // namespace difftest
