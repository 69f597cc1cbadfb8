#include "difftest/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "difftest/numerics.hpp"

namespace difftest {

double biweight(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  const double s = 1.0 - u * u;
  return 0.9375 * s * s;
}

double kh(double u, double h) { return biweight(u / h) / h; }

double kernel_r() { return 5.0 / 7.0; }

double kernel_sigma2() { return 1.0 / 7.0; }

double kernel_conv(double z, double c) {
  if (!(c > 0.0)) throw DomainError("kernel_conv: c > 0 required");
  // Overlap of u in [-1,1] with z+cu in [-1,1].
  const double lo = std::max(-1.0, (-1.0 - z) / c);
  const double hi = std::min(1.0, (1.0 - z) / c);
  if (lo >= hi) return 0.0;
  // Degree-8 polynomial integrand: 5-point Gauss-Legendre is exact.
  return gauss_legendre([&](double u) { return biweight(u) * biweight(z + c * u); },
                        lo, hi, 5);
}

double kernel_conv_moment(double t) {
  const double lo = std::max(-1.0, -1.0 - t);
  const double hi = std::min(1.0, 1.0 - t);
  if (lo >= hi) return 0.0;
  return gauss_legendre([&](double u) { return u * biweight(u) * biweight(t + u); },
                        lo, hi, 5);
}

namespace {

// int { K2(v,t) }^2 dv. K2(.,t) is polynomial between the knots
// {-1-t, -|1-t|, |1-t|, 1+t}; the squared integrand has degree <= 18, so a
// 10-point rule per piece is exact.
double conv_square_integral(double t) {
  const double d = std::abs(1.0 - t);
  const double knots[4] = {-1.0 - t, -d, d, 1.0 + t};
  double total = 0.0;
  auto f = [&](double v) {
    const double k = kernel_conv(v, t);
    return k * k;
  };
  for (int i = 0; i < 3; ++i) {
    if (knots[i] < knots[i + 1])
      total += gauss_legendre(f, knots[i], knots[i + 1], 10);
  }
  return total;
}

}  // namespace

double kernel_k4_zero() {
  static const double value = conv_square_integral(1.0);
  return value;
}

double kernel_nu(double t) {
  if (!(t > 0.0)) throw DomainError("kernel_nu: t > 0 required");
  // First factor int {K2(tu,t)}^2 du equals the second divided by t.
  const double b = conv_square_integral(t);
  return b * b / t;
}

double stationary_kde(const Array& values, double h, double x) {
  if (!(h > 0.0)) throw DomainError("stationary_kde: h > 0 required");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) sum += kh(x - values(i), h);
  return sum / static_cast<double>(values.size());
}

double transition_kde(const ObservedPath& path, double h, double x, double y) {
  const double pi = stationary_kde(path.values, h, x);
  if (!(pi > 0.0))
    throw NumericError("transition_kde: stationary estimate vanishes at x");
  const int n = path.n();
  double sum = 0.0;
  for (int t = 0; t < n; ++t)
    sum += kh(x - path.values(t), h) * kh(y - path.values(t + 1), h);
  return sum / n / pi;
}

Array local_linear_weights(const Array& values, double h, double y,
                           LocalLinearDiag* diag) {
  const Eigen::Index m = values.size();
  Array k(m), d(m);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    d(i) = y - values(i);
    k(i) = kh(d(i), h);
    s0 += k(i);
    s1 += k(i) * d(i);
    s2 += k(i) * d(i) * d(i);
  }
  if (!(s0 > 0.0))
    throw NumericError("local_linear_weights: no observation within h of y");
  const double den = s2 * s0 - s1 * s1;
  if (den > 1e-12 * std::abs(s2 * s0)) {
    if (diag) diag->nadaraya_fallback = false;
    return k * (s2 - s1 * d) / den;
  }
  if (diag) diag->nadaraya_fallback = true;
  return k / s0;
}

double smoothed_param_density(const ObservedPath& path, double h,
                              const std::function<double(double, double)>& density,
                              double x, double y) {
  const Array& v = path.values;
  Array w;
  bool raw = false;
  try {
    w = local_linear_weights(v, h, y);
  } catch (const NumericError&) {
    raw = true;  // empty window at y: keep the parametric density unsmoothed
  }
  double num = 0.0, den = 0.0;
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    const double kx = kh(x - v(t), h);
    if (kx == 0.0) continue;
    double inner = 0.0;
    if (raw) {
      inner = density(y, v(t));
    } else {
      for (Eigen::Index s = 0; s < v.size(); ++s) {
        if (w(s) != 0.0) inner += w(s) * density(v(s), v(t));
      }
    }
    num += kx * inner;
    den += kx;
  }
  if (!(den > 0.0))
    throw NumericError("smoothed_param_density: no observation within h of x");
  return num / den;
}

PathKernelCache::PathKernelCache(const ObservedPath& path) { init_order(path); }

PathKernelCache::PathKernelCache(
    const ObservedPath& path,
    const std::function<double(double, double)>& density_y_given_x) {
  init_order(path);
  density_ = density_y_given_x;
  const Eigen::Index m = xs_.size();
  p_.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) p_(i, j) = density_y_given_x(xs_(j), xs_(i));
  has_density_ = true;
}

void PathKernelCache::init_order(const ObservedPath& path) {
  n_ = path.n();
  delta_ = path.delta;
  const Eigen::Index m = path.values.size();
  xs_ = path.values;
  std::sort(xs_.data(), xs_.data() + m);

  std::vector<int> order(n_);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return path.values(a) < path.values(b);
  });
  pair_x_.resize(n_);
  pair_y_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    pair_x_(i) = path.values(order[i]);
    pair_y_(i) = path.values(order[i] + 1);
  }
}

std::pair<int, int> PathKernelCache::window(double p, double h) const {
  const double* b = xs_.data();
  const double* e = b + xs_.size();
  const int lo = static_cast<int>(std::lower_bound(b, e, p - h) - b);
  const int hi = static_cast<int>(std::upper_bound(b, e, p + h) - b);
  return {lo, hi};
}

double PathKernelCache::pi_hat(double x, double h) const {
  const auto [lo, hi] = window(x, h);
  double sum = 0.0;
  for (int i = lo; i < hi; ++i) sum += kh(x - xs_(i), h);
  return sum / (n_ + 1);
}

double PathKernelCache::joint_kde_at(double x, double y, double h) const {
  const double* b = pair_x_.data();
  const double* e = b + n_;
  const int lo = static_cast<int>(std::lower_bound(b, e, x - h) - b);
  const int hi = static_cast<int>(std::upper_bound(b, e, x + h) - b);
  double sum = 0.0;
  for (int t = lo; t < hi; ++t) {
    const double ky = kh(y - pair_y_(t), h);
    if (ky != 0.0) sum += kh(x - pair_x_(t), h) * ky;
  }
  return sum / n_;
}

double PathKernelCache::transition_kde_at(double x, double y, double h) const {
  const double pi = pi_hat(x, h);
  if (!(pi > 0.0))
    throw NumericError("transition_kde: stationary estimate vanishes at x");
  return joint_kde_at(x, y, h) / pi;
}

int PathKernelCache::active_pair_products(double x, double y, double h,
                                          std::vector<double>& out) const {
  const double* b = pair_x_.data();
  const double* e = b + n_;
  const int lo = static_cast<int>(std::lower_bound(b, e, x - h) - b);
  const int hi = static_cast<int>(std::upper_bound(b, e, x + h) - b);
  for (int t = lo; t < hi; ++t) {
    const double ky = kh(y - pair_y_(t), h);
    if (ky != 0.0) out.push_back(kh(x - pair_x_(t), h) * ky);
  }
  return n_;
}

std::pair<int, int> PathKernelCache::ll_weights(double y, double h,
                                                std::vector<double>& w,
                                                bool* fallback) const {
  const auto [lo, hi] = window(y, h);
  w.clear();
  *fallback = false;
  if (lo >= hi) return {lo, hi};
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  w.resize(hi - lo);
  for (int j = lo; j < hi; ++j) {
    const double d = y - xs_(j);
    const double k = kh(d, h);
    w[j - lo] = k;
    s0 += k;
    s1 += k * d;
    s2 += k * d * d;
  }
  if (!(s0 > 0.0)) {
    w.clear();
    return {lo, lo};
  }
  const double den = s2 * s0 - s1 * s1;
  if (den > 1e-12 * std::abs(s2 * s0)) {
    for (int j = lo; j < hi; ++j)
      w[j - lo] *= (s2 - s1 * (y - xs_(j))) / den;
  } else {
    *fallback = true;
    for (auto& wi : w) wi /= s0;
  }
  return {lo, hi};
}

PathKernelCache::Smoothed PathKernelCache::smoothed_at(double x, double y,
                                                       double h) const {
  if (!has_density_)
    throw DomainError("smoothed_at: cache built without a parametric density");
  Smoothed out;
  thread_local std::vector<double> w;
  bool fb = false;
  const auto [ylo, yhi] = ll_weights(y, h, w, &fb);
  out.ll_fallback = fb;
  out.raw_fallback = w.empty();

  const auto [xlo, xhi] = window(x, h);
  double num = 0.0, kx_sum = 0.0;
  for (int i = xlo; i < xhi; ++i) {
    const double kx = kh(x - xs_(i), h);
    if (kx == 0.0) continue;
    double inner = 0.0;
    if (out.raw_fallback) {
      // No observation within h of y: the local-linear stage cannot be
      // formed, so the parametric density enters unsmoothed. The model then
      // still claims mass at points the data never reach.
      inner = density_(y, xs_(i));
    } else {
      const double* row = p_.data() + static_cast<size_t>(i) * xs_.size();
      for (int j = ylo; j < yhi; ++j) inner += w[j - ylo] * row[j];
    }
    num += kx * inner;
    kx_sum += kx;
  }
  out.pi_hat = kx_sum / (n_ + 1);
  // Joint form p~(y|x)·pi_hat(x) = num/(n+1): finite even when kx_sum = 0.
  out.target_joint = num / (n_ + 1);
  out.p_tilde = kx_sum > 0.0 ? num / kx_sum
                             : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace difftest
