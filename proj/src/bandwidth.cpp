#include "difftest/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "difftest/kernel.hpp"

namespace difftest {

BandwidthSet::BandwidthSet(std::vector<double> v) : values(std::move(v)) {
  if (values.empty()) throw DomainError("bandwidth set: empty");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) throw DomainError("bandwidth set: h > 0 required");
    if (i > 0 && !(values[i] > values[i - 1]))
      throw DomainError("bandwidth set: strictly increasing required");
  }
}

double BandwidthSet::ratio() const {
  if (values.size() < 2) return 1.0;
  return std::pow(values.front() / values.back(),
                  1.0 / static_cast<double>(values.size() - 1));
}

bool BandwidthSet::is_geometric(double tol) const {
  const double a = ratio();
  for (size_t k = 0; k + 1 < values.size(); ++k)
    if (std::abs(values[k] / values[k + 1] - a) > tol) return false;
  return true;
}

double scott_rule(const ObservedPath& path) {
  const int n = path.n();
  if (n < 10) throw DomainError("scott_rule: n >= 10 required");
  const double mean = path.values.mean();
  const double var = (path.values - mean).square().sum() / path.values.size();
  if (!(var > 0.0)) throw DomainError("scott_rule: zero variance");
  return std::sqrt(var) * std::pow(static_cast<double>(n), -1.0 / 6.0);
}

double cv_criterion(const ObservedPath& path, double h) {
  const int n = path.n();
  const Array& v = path.values;
  double crit = 0.0;
  for (int t = 0; t < n; ++t) {
    const double x = v(t), y = v(t + 1);
    // Pairs excluding t and its 1-lag neighbours.
    double f = 0.0;      // sum_s K_h(x - X_s)
    double g = 0.0;      // sum_s K_h(x - X_s) K_h(y - X_{s+1})
    double q = 0.0;      // double sum for the integrated square
    thread_local std::vector<int> active;
    thread_local std::vector<double> kx;
    active.clear();
    kx.clear();
    for (int s = 0; s < n; ++s) {
      if (s >= t - 1 && s <= t + 1) continue;
      const double k = kh(x - v(s), h);
      if (k == 0.0) continue;
      active.push_back(s);
      kx.push_back(k);
      f += k;
      g += k * kh(y - v(s + 1), h);
    }
    if (!(f > 0.0)) return std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < active.size(); ++a) {
      q += kx[a] * kx[a] * kernel_r() / h;  // int K_h(u-c)^2 du = R(K)/h
      for (size_t b = a + 1; b < active.size(); ++b) {
        const double dz = (v(active[b] + 1) - v(active[a] + 1)) / h;
        if (std::abs(dz) < 2.0)
          q += 2.0 * kx[a] * kx[b] * kernel_conv(dz, 1.0) / h;
      }
    }
    crit += q / (f * f) - 2.0 * g / f;
  }
  return crit / n;
}

double cv_select(const ObservedPath& path, const std::vector<double>& h_grid) {
  if (h_grid.empty()) throw DomainError("cv_select: empty grid");
  if (path.n() < 20) throw DomainError("cv_select: n >= 20 required");
  double best_h = 0.0, best = std::numeric_limits<double>::infinity();
  for (double h : h_grid) {
    const double c = cv_criterion(path, h);
    if (std::isfinite(c) && c < best) {
      best = c;
      best_h = h;
    }
  }
  if (!(best_h > 0.0)) throw NumericError("cv_select: no finite criterion value");
  return best_h;
}

std::vector<double> default_cv_grid(const ObservedPath& path) {
  const double ref = scott_rule(path);
  std::vector<double> grid;
  for (double f = 0.2; f <= 3.001; f *= 1.25) grid.push_back(f * ref);
  return grid;
}

BandwidthSet build_set(double anchor, BandwidthScheme scheme, int J, double a,
                       double terminal) {
  if (J < 1) throw DomainError("build_set: J >= 1");
  if (!(anchor > 0.0)) throw DomainError("build_set: anchor > 0");
  if (J == 1) return BandwidthSet({anchor});

  int position;  // 1-based index of the anchor in the set
  switch (scheme) {
    case BandwidthScheme::CvLowerRange:
      position = 2;
      break;
    case BandwidthScheme::RefThirdSmallest:
      position = 3;
      break;
    case BandwidthScheme::Endpoints: {
      if (!(terminal > anchor))
        throw DomainError("build_set: endpoints need h_J > h_1");
      a = std::pow(anchor / terminal, 1.0 / static_cast<double>(J - 1));
      position = 1;
      break;
    }
    default:
      throw DomainError("build_set: scheme needs an explicit value list");
  }
  if (!(a > 0.0 && a < 1.0)) throw DomainError("build_set: a in (0,1) required");
  if (position > J) throw DomainError("build_set: J too small for the scheme");

  std::vector<double> values(J);
  for (int k = 1; k <= J; ++k)
    values[k - 1] = anchor * std::pow(a, position - k);
  return BandwidthSet(std::move(values));
}

}  // namespace difftest
