#pragma once

#include <cstdint>
#include <vector>

#include "difftest/bandwidth.hpp"
#include "difftest/kernel.hpp"
#include "difftest/models.hpp"
#include "difftest/region.hpp"
#include "difftest/types.hpp"

namespace difftest {

enum class Variant { EL, LSEL };
enum class StatMode { GridIntegral, DataAverage };

struct GridSpec {
  int m_u = 40;
  int m_v = 40;
};

struct LocalELResult {
  double lambda = 0.0;
  double ratio = 0.0;
  double constraint_residual = 0.0;  // |sum T/(1+lambda T)| / (n max|T|)
  bool weights_ok = true;            // root found, all q_t > 0
  bool hull_error = false;           // target outside the hull of kernel values
};

/// Local EL machinery on a T-sample given in compressed form: `t_active`
/// explicit values plus `zero_pairs` copies of `t_rest` (the pairs whose
/// kernel product vanishes, T_t = -target).
LocalELResult solve_el(const std::vector<double>& t_active, int zero_pairs,
                       double t_rest);
double solve_lsel(const std::vector<double>& t_active, int zero_pairs, double t_rest);

/// Log EL ratio for the constraint sum q_t K_h(x-X_t) K_h(y-X_{t+1}) = target,
/// target on the joint-density scale. Throws ConvexHullError when the target
/// lies outside the convex hull of the kernel products.
LocalELResult el_ratio(const ObservedPath& path, double h, double target,
                       double x, double y);

/// Least-squares EL ratio T^2/S with T = sum T_t, S = sum T_t^2; 0 when S = 0.
double lsel_ratio(const ObservedPath& path, double h, double target, double x,
                  double y);

/// Local ratio capped at 2 n log n on hull failure, as used inside N(h).
double capped_local_ratio(Variant variant, const std::vector<double>& t_active,
                          int zero_pairs, double t_rest, int n, bool* hull_error);

struct NhResult {
  double h = 0.0;
  double value = 0.0;        // N(h)
  double standardized = 0.0; // (N(h)-1)/(sqrt2 h)
  long hull_errors = 0;
  long ll_fallbacks = 0;
  long points = 0;
};

/// Engine for the global statistics: one path, one fitted parameter,
/// evaluated over a bandwidth set. Precomputes the parametric transition
/// matrix once and reuses it for every bandwidth and point.
class TestStatEngine {
 public:
  TestStatEngine(const ObservedPath& path, const DiffusionModel& model,
                 const Vector& theta);

  NhResult n_of_h(double h, const Region& region, const GridSpec& grid,
                  Variant variant, StatMode mode) const;

  std::vector<NhResult> all(const BandwidthSet& hs, const Region& region,
                            const GridSpec& grid, Variant variant,
                            StatMode mode) const;

  const PathKernelCache& cache() const { return cache_; }

 private:
  double local_ratio(double x, double y, double h, Variant variant,
                     bool* hull, bool* fallback) const;

  const ObservedPath path_;
  PathKernelCache cache_;
  int n_;
};

/// Final statistic L_n = max_k (N(h_k) - 1)/(sqrt2 h_k).
double l_n(const std::vector<NhResult>& per_h);
double l_n_pairs(const std::vector<std::pair<double, double>>& h_and_n);

/// Asymptotic reference of the limiting max-Gaussian law: plug-in beta,
/// covariance from the kernel functional nu, Monte Carlo quantiles.
struct AsymptoticRef {
  double beta = 0.0;           // appendix normalization 1/(sqrt2 R(K))
  double beta_section4 = 0.0;  // 1/R(K) normalization, recorded alongside
  Matrix sigma;                // J x J
  std::vector<double> draws;   // sorted max-draws (empty when J = 1)

  /// Quantile of max_k Z_k at probability p (exact normal when J = 1).
  double quantile(double p) const;
};

AsymptoticRef asymptotic_ref(const ObservedPath& path, const BandwidthSet& hs,
                             const Region& region, const GridSpec& grid,
                             int mc_draws = 100000, uint64_t seed = 0x5eedbeef);

}  // namespace difftest
