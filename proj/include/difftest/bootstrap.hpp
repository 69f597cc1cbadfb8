#pragma once

#include <cstdint>
#include <vector>

#include "difftest/el.hpp"

namespace difftest {

struct BootstrapConfig {
  BandwidthSet bandwidths;       // reused in every replicate unless reselect
  bool reselect = false;         // rebuild per replicate from its Scott rule
  double reselect_a = 0.95;
  int reselect_j = 6;
  Region region;
  GridSpec grid;
  Variant variant = Variant::LSEL;
  StatMode mode = StatMode::GridIntegral;
  int B = 250;
  double alpha = 0.05;
  uint64_t seed = 1;
  int euler_substeps = 20;
  bool parallel = true;
};

struct BootstrapResult {
  double observed_l_n = 0.0;
  std::vector<double> replicates;  // sorted ascending, length B_effective
  double critical_value = 0.0;     // order statistic [B(1-alpha)]+1
  double p_value = 1.0;
  double alpha = 0.05;
  int B = 0;                       // requested
  int B_effective = 0;
  int fit_failures = 0;
  bool reject = false;

  std::vector<NhResult> observed_per_h;
  // Standardized per-bandwidth statistics per replicate (B_effective x J),
  // aligned by bandwidth index; feeds the single-bandwidth tests.
  Matrix replicate_per_h;
};

/// Monte Carlo p-value (1 + #{replicates >= observed}) / (B + 1).
double p_value(double observed, const std::vector<double>& replicates);

/// Index (0-based) of the critical order statistic in the sorted replicate
/// vector: floor(B(1-alpha)) + 1 in 1-based terms, clamped to the sample.
int critical_index(int B, double alpha);

/// Parametric bootstrap calibration: simulate under the fitted null, refit,
/// recompute L_n with the identical region/bandwidths/grid/variant, and
/// calibrate by the order-statistic rule. Rejects when observed >= l*_alpha.
BootstrapResult bootstrap_test(const ObservedPath& path, const DiffusionModel& model,
                               const Vector& theta_fitted, const BootstrapConfig& cfg);

}  // namespace difftest
