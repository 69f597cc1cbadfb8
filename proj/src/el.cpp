#include "difftest/el.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "difftest/numerics.hpp"
#include "difftest/rng.hpp"

namespace difftest {

namespace {

constexpr double kLambdaTol = 1e-15;  // relative residual target for the root

struct TStats {
  double tmax = -std::numeric_limits<double>::infinity();
  double tmin = std::numeric_limits<double>::infinity();
  double tabs = 0.0;
  long n = 0;
};

TStats t_stats(const std::vector<double>& t_active, int zero_pairs, double t_rest) {
  TStats s;
  for (double t : t_active) {
    s.tmax = std::max(s.tmax, t);
    s.tmin = std::min(s.tmin, t);
    s.tabs = std::max(s.tabs, std::abs(t));
  }
  if (zero_pairs > 0) {
    s.tmax = std::max(s.tmax, t_rest);
    s.tmin = std::min(s.tmin, t_rest);
    s.tabs = std::max(s.tabs, std::abs(t_rest));
  }
  s.n = static_cast<long>(t_active.size()) + zero_pairs;
  return s;
}

}  // namespace

LocalELResult solve_el(const std::vector<double>& t_active, int zero_pairs,
                       double t_rest) {
  LocalELResult out;
  const TStats s = t_stats(t_active, zero_pairs, t_rest);
  if (s.n == 0) throw DomainError("solve_el: empty sample");
  if (s.tabs == 0.0) return out;  // all T_t = 0: lambda = 0, ratio = 0

  if (!(s.tmax > 0.0) || !(s.tmin < 0.0)) {
    out.hull_error = true;
    out.weights_ok = false;
    return out;
  }

  // f(lambda) = sum T_t/(1+lambda T_t) is strictly decreasing between the
  // poles; bracket the root and run safeguarded Newton.
  const double eps = 1e-12;
  double lo = -1.0 / s.tmax, hi = -1.0 / s.tmin;
  lo += eps * (hi - lo);
  hi -= eps * (hi - lo);

  auto f_and_df = [&](double lam, double* df) {
    double f = 0.0, d = 0.0;
    for (double t : t_active) {
      const double w = 1.0 + lam * t;
      f += t / w;
      d -= t * t / (w * w);
    }
    if (zero_pairs > 0) {
      const double w = 1.0 + lam * t_rest;
      f += zero_pairs * t_rest / w;
      d -= zero_pairs * t_rest * t_rest / (w * w);
    }
    if (df) *df = d;
    return f;
  };

  double lam = 0.0;
  double flo = f_and_df(lo, nullptr), fhi = f_and_df(hi, nullptr);
  if (!(flo > 0.0) || !(fhi < 0.0)) {
    // Root pushed into the guard band next to a pole; take the boundary.
    lam = flo <= 0.0 ? lo : hi;
  } else {
    double df = 0.0;
    double fv = f_and_df(lam, &df);
    for (int it = 0; it < 200; ++it) {
      if (std::abs(fv) <= kLambdaTol * s.n * s.tabs) break;
      if (fv > 0.0) lo = lam;
      else hi = lam;
      double next = lam - fv / df;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      lam = next;
      fv = f_and_df(lam, &df);
    }
  }

  double ratio = 0.0;
  for (double t : t_active) ratio += std::log1p(lam * t);
  if (zero_pairs > 0) ratio += zero_pairs * std::log1p(lam * t_rest);
  out.lambda = lam;
  out.ratio = std::max(0.0, 2.0 * ratio);
  out.constraint_residual = std::abs(f_and_df(lam, nullptr)) / (s.n * s.tabs);
  out.weights_ok = out.constraint_residual <= 1e-9;
  return out;
}

double solve_lsel(const std::vector<double>& t_active, int zero_pairs, double t_rest) {
  double t_sum = 0.0, s_sum = 0.0;
  for (double t : t_active) {
    t_sum += t;
    s_sum += t * t;
  }
  t_sum += zero_pairs * t_rest;
  s_sum += zero_pairs * t_rest * t_rest;
  return s_sum > 0.0 ? t_sum * t_sum / s_sum : 0.0;
}

double capped_local_ratio(Variant variant, const std::vector<double>& t_active,
                          int zero_pairs, double t_rest, int n, bool* hull_error) {
  if (variant == Variant::LSEL) {
    if (hull_error) *hull_error = false;
    return solve_lsel(t_active, zero_pairs, t_rest);
  }
  const LocalELResult r = solve_el(t_active, zero_pairs, t_rest);
  if (hull_error) *hull_error = r.hull_error;
  if (r.hull_error) return 2.0 * n * std::log(static_cast<double>(n));
  return r.ratio;
}

namespace {

// T-sample of the local EL at (x,y): kernel pair products minus the target.
void build_t_sample(const ObservedPath& path, double h, double target, double x,
                    double y, std::vector<double>& t_active, int* zero_pairs) {
  t_active.clear();
  int actives = 0;
  for (int t = 0; t < path.n(); ++t) {
    const double v = kh(x - path.values(t), h) * kh(y - path.values(t + 1), h);
    if (v != 0.0) {
      t_active.push_back(v - target);
      ++actives;
    }
  }
  *zero_pairs = path.n() - actives;
}

}  // namespace

LocalELResult el_ratio(const ObservedPath& path, double h, double target,
                       double x, double y) {
  std::vector<double> t_active;
  int zero_pairs = 0;
  build_t_sample(path, h, target, x, y, t_active, &zero_pairs);
  const LocalELResult r = solve_el(t_active, zero_pairs, -target);
  if (r.hull_error)
    throw ConvexHullError("el_ratio: target outside the hull of kernel values");
  return r;
}

double lsel_ratio(const ObservedPath& path, double h, double target, double x,
                  double y) {
  std::vector<double> t_active;
  int zero_pairs = 0;
  build_t_sample(path, h, target, x, y, t_active, &zero_pairs);
  return solve_lsel(t_active, zero_pairs, -target);
}

TestStatEngine::TestStatEngine(const ObservedPath& path, const DiffusionModel& model,
                               const Vector& theta)
    : path_(path),
      cache_(path,
             [&model, theta, delta = path.delta](double y, double x) {
               return transition_density(model, y, x, delta, theta);
             }),
      n_(path.n()) {}

double TestStatEngine::local_ratio(double x, double y, double h, Variant variant,
                                   bool* hull, bool* fallback) const {
  const PathKernelCache::Smoothed sm = cache_.smoothed_at(x, y, h);
  if (fallback) *fallback = sm.ll_fallback;
  const double target = sm.target_joint;

  thread_local std::vector<double> t_active;
  t_active.clear();
  const int n = cache_.active_pair_products(x, y, h, t_active);
  for (double& v : t_active) v -= target;
  const int zero_pairs = n - static_cast<int>(t_active.size());
  return capped_local_ratio(variant, t_active, zero_pairs, -target, n, hull);
}

NhResult TestStatEngine::n_of_h(double h, const Region& region, const GridSpec& grid,
                                Variant variant, StatMode mode) const {
  NhResult out;
  out.h = h;
  double acc = 0.0;
  if (mode == StatMode::GridIntegral) {
    const auto cells = grid_over(region, grid.m_u, grid.m_v);
    const double inv_area = 1.0 / region.area();
    for (const auto& cell : cells) {
      bool hull = false, fb = false;
      const double ratio = local_ratio(cell.x, cell.y, h, variant, &hull, &fb);
      acc += ratio * inv_area * cell.area;
      out.hull_errors += hull;
      out.ll_fallbacks += fb;
      ++out.points;
    }
  } else {
    // Data-average form: indicator weight, so the implied grid weight
    // p(x,y) 1_S integrates to approximately one and N(h) keeps the same
    // scale as the grid form.
    for (int t = 0; t < n_; ++t) {
      const double x = path_.values(t), y = path_.values(t + 1);
      if (!region.contains(x, y)) continue;
      bool hull = false, fb = false;
      const double ratio = local_ratio(x, y, h, variant, &hull, &fb);
      acc += ratio;
      out.hull_errors += hull;
      out.ll_fallbacks += fb;
      ++out.points;
    }
    acc /= n_;
  }
  out.value = acc;
  out.standardized = (acc - 1.0) / (std::sqrt(2.0) * h);
  return out;
}

std::vector<NhResult> TestStatEngine::all(const BandwidthSet& hs, const Region& region,
                                          const GridSpec& grid, Variant variant,
                                          StatMode mode) const {
  std::vector<NhResult> out;
  out.reserve(hs.values.size());
  for (double h : hs.values) out.push_back(n_of_h(h, region, grid, variant, mode));
  return out;
}

double l_n(const std::vector<NhResult>& per_h) {
  if (per_h.empty()) throw DomainError("l_n: empty bandwidth results");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : per_h) best = std::max(best, r.standardized);
  return best;
}

double l_n_pairs(const std::vector<std::pair<double, double>>& h_and_n) {
  if (h_and_n.empty()) throw DomainError("l_n: empty bandwidth results");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [h, nh] : h_and_n) {
    if (!(h > 0.0)) throw DomainError("l_n: h > 0 required");
    best = std::max(best, (nh - 1.0) / (std::sqrt(2.0) * h));
  }
  return best;
}

double AsymptoticRef::quantile(double p) const {
  if (sigma.rows() == 1)
    return beta + std::sqrt(sigma(0, 0)) * normal_quantile(p);
  const size_t idx = std::min(draws.size() - 1,
                              static_cast<size_t>(p * draws.size()));
  return draws[idx];
}

AsymptoticRef asymptotic_ref(const ObservedPath& path, const BandwidthSet& hs,
                             const Region& region, const GridSpec& grid,
                             int mc_draws, uint64_t seed) {
  AsymptoticRef out;
  const int J = hs.size();

  // Plug-in beta at the median bandwidth: Riemann sum of p_hat(x,y)/pi_hat(y)
  // over the region.
  const double h = hs.values[J / 2];
  PathKernelCache cache(path);
  const auto cells = grid_over(region, grid.m_u, grid.m_v);
  const double inv_area = 1.0 / region.area();
  double acc = 0.0;
  for (const auto& cell : cells) {
    const double pi_y = cache.pi_hat(cell.y, h);
    if (!(pi_y > 0.0)) continue;
    acc += cache.joint_kde_at(cell.x, cell.y, h) / pi_y * inv_area * cell.area;
  }
  out.beta_section4 = acc / kernel_r();
  out.beta = out.beta_section4 / std::sqrt(2.0);

  // Sigma_J from the kernel functional nu at the pairwise bandwidth ratios.
  // The cross-bandwidth entry uses t^2 nu(t) (= t [int K2(v,t)^2 dv]^2),
  // which is symmetric in t <-> 1/t and matches nu(1) on the diagonal; the
  // raw nu(t) is not a covariance off the diagonal.
  out.sigma.resize(J, J);
  const double scale = 2.0 / std::pow(kernel_r(), 4.0) * inv_area;
  for (int i = 0; i < J; ++i) {
    for (int j = 0; j < J; ++j) {
      const double t = std::min(hs.values[i], hs.values[j]) /
                       std::max(hs.values[i], hs.values[j]);
      out.sigma(i, j) = scale * t * t * kernel_nu(t);
    }
  }

  if (J > 1) {
    // Floor the spectrum, then draw max_k Z_k.
    Eigen::SelfAdjointEigenSolver<Matrix> es(out.sigma);
    Vector ev = es.eigenvalues().cwiseMax(1e-12);
    const Matrix root = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
    Rng rng(splitmix64(seed));
    out.draws.resize(mc_draws);
    Vector z(J);
    for (int d = 0; d < mc_draws; ++d) {
      for (int k = 0; k < J; ++k) z(k) = rng.normal();
      out.draws[d] = out.beta + (root * z).maxCoeff();
    }
    std::sort(out.draws.begin(), out.draws.end());
  }
  return out;
}

}  // namespace difftest
