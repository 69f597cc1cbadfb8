#pragma once

// Test-side oracles, independent of the library's numerical routines.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

/// Romberg integration (independent of the library's adaptive Simpson).
inline double romberg(const std::function<double(double)>& f, double a, double b,
                      int max_level = 22, double tol = 1e-12) {
  std::vector<std::vector<double>> r(max_level);
  double h = b - a;
  r[0] = {0.5 * h * (f(a) + f(b))};
  for (int k = 1; k < max_level; ++k) {
    h *= 0.5;
    double sum = 0.0;
    const long pts = 1L << (k - 1);
    for (long i = 0; i < pts; ++i) sum += f(a + (2 * i + 1) * h);
    r[k].resize(k + 1);
    r[k][0] = 0.5 * r[k - 1][0] + h * sum;
    double pow4 = 1.0;
    for (int j = 1; j <= k; ++j) {
      pow4 *= 4.0;
      r[k][j] = r[k][j - 1] + (r[k][j - 1] - r[k - 1][j - 1]) / (pow4 - 1.0);
    }
    if (k > 3 && std::abs(r[k][k] - r[k - 1][k - 1]) < tol * (1.0 + std::abs(r[k][k])))
      return r[k][k];
  }
  return r[max_level - 1][max_level - 1];
}

/// Bisection root of a monotone function on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((flo > 0.0) == (fm > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// EL ratio by pure bisection on the Lagrange-multiplier equation.
inline double el_ratio_bisect(const std::vector<double>& t) {
  double tmax = -1e300, tmin = 1e300;
  for (double v : t) {
    tmax = std::max(tmax, v);
    tmin = std::min(tmin, v);
  }
  if (tmax == 0.0 && tmin == 0.0) return 0.0;
  if (!(tmax > 0.0 && tmin < 0.0))
    throw std::runtime_error("el_ratio_bisect: no interior solution");
  auto f = [&](double lam) {
    double s = 0.0;
    for (double v : t) s += v / (1.0 + lam * v);
    return s;
  };
  const double span = (-1.0 / tmin) - (-1.0 / tmax);
  const double lam =
      bisect(f, -1.0 / tmax + 1e-13 * span, -1.0 / tmin - 1e-13 * span, 300);
  double ratio = 0.0;
  for (double v : t) ratio += std::log1p(lam * v);
  return 2.0 * ratio;
}

/// Least-squares EL by the KKT system of min sum (n q_t - 1)^2 subject to
/// sum q_t T_t = 0, solved with dense linear algebra.
inline double lsel_constrained_ls(const std::vector<double>& t) {
  const int n = static_cast<int>(t.size());
  Eigen::VectorXd tv(n);
  for (int i = 0; i < n; ++i) tv(i) = t[i];
  // Minimize ||r||^2 with r = n q - 1 subject to t'r = -sum(t):
  // KKT: [2I tv; tv' 0][r; mu] = [0; -sum t].
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = 2.0 * Eigen::MatrixXd::Identity(n, n);
  kkt.topRightCorner(n, 1) = tv;
  kkt.bottomLeftCorner(1, n) = tv.transpose();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs(n) = -tv.sum();
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  return sol.head(n).squaredNorm();
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i;
    else ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

}  // namespace oracles
