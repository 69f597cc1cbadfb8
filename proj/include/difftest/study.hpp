#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "difftest/bootstrap.hpp"

namespace difftest {

/// One Monte Carlo size or power experiment: data generated under `truth`,
/// test of `null_family`, bootstrap calibration per repetition.
struct StudyDesign {
  DiffusionModel truth{Family::Vasicek};
  Vector theta_truth;
  Family null_family = Family::Vasicek;
  int n = 125;
  double delta = 1.0 / 12.0;
  Region region;
  bool data_driven = false;      // Scott-anchored set per sample (and replicate)
  BandwidthSet fixed_set;        // used when !data_driven
  double dd_a = 0.95;
  int dd_j = 6;
  int B = 99;
  double alpha = 0.05;
  int n_reps = 200;
  uint64_t master_seed = 20080101;
  Variant variant = Variant::LSEL;
  StatMode mode = StatMode::GridIntegral;
  GridSpec grid;
  bool with_asymptotic = false;  // Theorem-1 single-bandwidth tests
  int threads = 0;               // 0 = library default
};

struct RepRecord {
  int rep = 0;
  uint64_t seed = 0;
  Vector theta_hat;
  double l_n = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  bool reject = false;
  bool ok = false;
  std::vector<double> per_h_observed;   // standardized
  std::vector<bool> per_h_reject;       // single-bandwidth bootstrap tests
  std::vector<bool> asym_reject;        // Theorem-1 single-bandwidth tests
  long hull_errors = 0;
};

struct StudyResult {
  double rejection_rate = 0.0;
  double binomial_se = 0.0;
  std::vector<double> per_bandwidth_rates;
  double asymptotic_rate = 0.0;              // at the median bandwidth
  std::vector<double> asymptotic_per_h;
  int completed = 0;
  int failures = 0;
  double wall_seconds = 0.0;                 // reporting only, never serialized
  std::vector<RepRecord> reps;
};

StudyResult run_size_study(const StudyDesign& design);
StudyResult run_power_study(const StudyDesign& design);

namespace presets {

/// Vasicek parameter sets of the size study: model in {-2, 0, 2}. The
/// baseline model 0 is (0.85837, 0.089102, 0.0021854); -2 quadruples kappa
/// and sigma2, 2 quarters them.
Vector vasicek_theta(int model);
Region vasicek_region(int model);
BandwidthSet table1_bandwidths(int model, int n);

/// CIR parameter sets: k in {0, 1, 2}, kappa and sigma2 halving from
/// (0.89218, 0.09045, 0.032742).
Vector cir_theta(int k);
Region cir_region(int k);
BandwidthSet table3_bandwidths(int k, int n);

/// Power study: truth CIR 0, null Vasicek.
Region power_region();
BandwidthSet table4a_bandwidths(int n);

StudyDesign vasicek_table1(int model, int n, bool full_scale = false);
StudyDesign cir_table3(int k, int n, bool full_scale = false);
StudyDesign power_table4a(int n, bool full_scale = false);

/// Named presets for the CLI: vasicek-table1, cir-table3, power-table4a.
StudyDesign by_name(const std::string& name, int variant_id, int n, bool full_scale);

}  // namespace presets

}  // namespace difftest
