#pragma once

#include <vector>

#include "difftest/types.hpp"

namespace difftest {

class Rng;
struct DiffusionModel;

/// A rectangle [u_min,u_max] x [v_min,v_max] rotated 45 degrees
/// anticlockwise in the (x,y) plane. The u axis maps onto the x=y diagonal.
struct Region {
  double u_min = 0.0, u_max = 0.0;
  double v_min = 0.0, v_max = 0.0;

  Region() = default;
  Region(double umin, double umax, double vmin, double vmax);

  double area() const { return (u_max - u_min) * (v_max - v_min); }

  /// Membership: rotate (x,y) back by 45 degrees and test the rectangle.
  /// Half-open on the upper edges so grid tilings do not double count.
  bool contains(double x, double y) const;

  /// |S|^{-1} inside, 0 outside.
  double uniform_weight(double x, double y) const;

  /// Image of rectangle coordinates (u,v) in the (x,y) plane.
  static std::pair<double, double> to_xy(double u, double v);
  /// Rotated coordinates ((x+y)/sqrt2, (y-x)/sqrt2).
  static std::pair<double, double> to_uv(double x, double y);
};

struct GridCell {
  double x, y;
  double area;
};

/// Midpoint grid of m_u x m_v cells in rotated coordinates, mapped to (x,y).
/// Cell areas sum to |S| exactly.
std::vector<GridCell> grid_over(const Region& region, int m_u, int m_v);

struct CoverageEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo fraction of consecutive pairs of a simulated stationary path
/// that fall in the region.
CoverageEstimate coverage_probability(const Region& region,
                                      const DiffusionModel& model,
                                      const Vector& theta, double delta,
                                      int n_mc, Rng& rng);

/// Rotated bounding box of the middle 95% of the pair cloud, for user data
/// without an explicit region.
Region auto_region(const ObservedPath& path);

}  // namespace difftest
