#include "difftest/region.hpp"

#include <algorithm>
#include <cmath>

#include "difftest/models.hpp"
#include "difftest/rng.hpp"

namespace difftest {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
}

Region::Region(double umin, double umax, double vmin, double vmax)
    : u_min(umin), u_max(umax), v_min(vmin), v_max(vmax) {
  if (!(u_min < u_max) || !(v_min < v_max))
    throw DomainError("region: intervals must be nonempty");
}

std::pair<double, double> Region::to_xy(double u, double v) {
  return {(u - v) * kInvSqrt2, (u + v) * kInvSqrt2};
}

std::pair<double, double> Region::to_uv(double x, double y) {
  return {(x + y) * kInvSqrt2, (y - x) * kInvSqrt2};
}

bool Region::contains(double x, double y) const {
  const auto [u, v] = to_uv(x, y);
  return u >= u_min && u < u_max && v >= v_min && v < v_max;
}

double Region::uniform_weight(double x, double y) const {
  return contains(x, y) ? 1.0 / area() : 0.0;
}

std::vector<GridCell> grid_over(const Region& region, int m_u, int m_v) {
  if (m_u < 2 || m_v < 2) throw DomainError("grid_over: m_u, m_v >= 2 required");
  const double du = (region.u_max - region.u_min) / m_u;
  const double dv = (region.v_max - region.v_min) / m_v;
  std::vector<GridCell> cells;
  cells.reserve(static_cast<size_t>(m_u) * m_v);
  for (int i = 0; i < m_u; ++i) {
    const double u = region.u_min + (i + 0.5) * du;
    for (int j = 0; j < m_v; ++j) {
      const double v = region.v_min + (j + 0.5) * dv;
      const auto [x, y] = Region::to_xy(u, v);
      cells.push_back({x, y, du * dv});
    }
  }
  return cells;
}

CoverageEstimate coverage_probability(const Region& region,
                                      const DiffusionModel& model,
                                      const Vector& theta, double delta,
                                      int n_mc, Rng& rng) {
  if (n_mc < 1000) throw DomainError("coverage_probability: n_mc >= 1000");
  const double x0 = sample_stationary(model, theta, rng);
  const ObservedPath path = simulate_path(model, theta, n_mc, delta, x0, rng);
  long hits = 0;
  for (int t = 0; t < n_mc; ++t)
    if (region.contains(path.values(t), path.values(t + 1))) ++hits;
  CoverageEstimate out;
  out.probability = static_cast<double>(hits) / n_mc;
  out.standard_error =
      std::sqrt(out.probability * (1.0 - out.probability) / n_mc);
  return out;
}

Region auto_region(const ObservedPath& path) {
  const int n = path.n();
  std::vector<double> us(n), vs(n);
  for (int t = 0; t < n; ++t) {
    const auto [u, v] = Region::to_uv(path.values(t), path.values(t + 1));
    us[t] = u;
    vs[t] = v;
  }
  auto mid95 = [](std::vector<double>& a) {
    std::sort(a.begin(), a.end());
    const size_t m = a.size();
    const size_t lo = static_cast<size_t>(0.025 * (m - 1));
    const size_t hi = static_cast<size_t>(std::ceil(0.975 * (m - 1)));
    return std::make_pair(a[lo], a[hi]);
  };
  const auto [ulo, uhi] = mid95(us);
  const auto [vlo, vhi] = mid95(vs);
  if (!(ulo < uhi) || !(vlo < vhi))
    throw NumericError("auto_region: degenerate data cloud");
  return Region(ulo, uhi, vlo, vhi);
}

}  // namespace difftest
