#include "difftest/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "difftest/numerics.hpp"
#include "difftest/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace difftest {

namespace {

RepRecord run_rep(const StudyDesign& d, int rep) {
  RepRecord rec;
  rec.rep = rep;
  rec.seed = splitmix64(d.master_seed ^ static_cast<uint64_t>(rep));

  Rng rng = Rng::stream(d.master_seed, {0x0B5u, static_cast<uint64_t>(rep)});
  const double x0 = sample_stationary(d.truth, d.theta_truth, rng);
  const ObservedPath path =
      simulate_path(d.truth, d.theta_truth, d.n, d.delta, x0, rng);

  const DiffusionModel null_model(d.null_family);
  const FitResult fit = fit_mle(null_model, path);
  if (!fit.converged) return rec;
  rec.theta_hat = fit.theta_hat;

  BootstrapConfig cfg;
  cfg.reselect = d.data_driven;
  cfg.reselect_a = d.dd_a;
  cfg.reselect_j = d.dd_j;
  cfg.bandwidths =
      d.data_driven
          ? build_set(scott_rule(path), BandwidthScheme::RefThirdSmallest, d.dd_j, d.dd_a)
          : d.fixed_set;
  cfg.region = d.region;
  cfg.grid = d.grid;
  cfg.variant = d.variant;
  cfg.mode = d.mode;
  cfg.B = d.B;
  cfg.alpha = d.alpha;
  cfg.seed = splitmix64(d.master_seed ^ (0xFACEu + static_cast<uint64_t>(rep)));
  cfg.parallel = false;  // reps already run in parallel

  BootstrapResult boot;
  try {
    boot = bootstrap_test(path, null_model, fit.theta_hat, cfg);
  } catch (const std::exception&) {
    return rec;
  }

  rec.l_n = boot.observed_l_n;
  rec.critical_value = boot.critical_value;
  rec.p_value = boot.p_value;
  rec.reject = boot.reject;

  const int J = cfg.bandwidths.size();
  rec.per_h_observed.resize(J);
  rec.per_h_reject.resize(J);
  for (int k = 0; k < J; ++k) {
    rec.per_h_observed[k] = boot.observed_per_h[k].standardized;
    rec.hull_errors += boot.observed_per_h[k].hull_errors;
    // Single-bandwidth bootstrap test: column-k order statistic.
    Vector col = boot.replicate_per_h.col(k);
    std::sort(col.data(), col.data() + col.size());
    const double crit =
        col(critical_index(static_cast<int>(col.size()), d.alpha));
    rec.per_h_reject[k] = rec.per_h_observed[k] >= crit;
  }

  if (d.with_asymptotic) {
    rec.asym_reject.resize(J);
    for (int k = 0; k < J; ++k) {
      const AsymptoticRef ref =
          asymptotic_ref(path, BandwidthSet::single(cfg.bandwidths.values[k]),
                         d.region, d.grid);
      rec.asym_reject[k] = rec.per_h_observed[k] >= ref.quantile(1.0 - d.alpha);
    }
  }
  rec.ok = true;
  return rec;
}

StudyResult run_study(const StudyDesign& d) {
  if (d.n_reps < 10) throw DomainError("study: n_reps >= 10 required");
  if (!d.data_driven && d.fixed_set.size() == 0)
    throw DomainError("study: fixed bandwidth set required");
  validate_params(d.truth, d.theta_truth);

  const auto start = std::chrono::steady_clock::now();
#ifdef _OPENMP
  if (d.threads > 0) omp_set_num_threads(d.threads);
#endif

  std::vector<RepRecord> reps(d.n_reps);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int rep = 0; rep < d.n_reps; ++rep) {
    try {
      reps[rep] = run_rep(d, rep);
    } catch (const std::exception&) {
      reps[rep].rep = rep;
      reps[rep].ok = false;
    }
  }

  StudyResult out;
  out.reps = std::move(reps);
  const int J = d.data_driven ? d.dd_j : d.fixed_set.size();
  out.per_bandwidth_rates.assign(J, 0.0);
  out.asymptotic_per_h.assign(J, 0.0);
  long rejects = 0;
  for (const auto& r : out.reps) {
    if (!r.ok) {
      ++out.failures;
      continue;
    }
    ++out.completed;
    rejects += r.reject;
    for (int k = 0; k < J; ++k) {
      out.per_bandwidth_rates[k] += r.per_h_reject[k];
      if (d.with_asymptotic) out.asymptotic_per_h[k] += r.asym_reject[k];
    }
  }
  if (out.failures * 20 > d.n_reps)
    throw NumericError("study: more than 5% of repetitions failed");
  if (out.completed == 0) throw NumericError("study: no completed repetitions");

  out.rejection_rate = static_cast<double>(rejects) / out.completed;
  out.binomial_se = std::sqrt(out.rejection_rate * (1.0 - out.rejection_rate) /
                              out.completed);
  for (int k = 0; k < J; ++k) {
    out.per_bandwidth_rates[k] /= out.completed;
    out.asymptotic_per_h[k] /= out.completed;
  }
  out.asymptotic_rate = d.with_asymptotic ? out.asymptotic_per_h[J / 2] : 0.0;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

StudyResult run_size_study(const StudyDesign& design) { return run_study(design); }

StudyResult run_power_study(const StudyDesign& design) { return run_study(design); }

namespace presets {

namespace {

BandwidthSet bw(std::initializer_list<double> v) { return BandwidthSet(std::vector<double>(v)); }

int n_slot(int n) {
  if (n == 125) return 0;
  if (n == 250) return 1;
  if (n == 500) return 2;
  throw DomainError("presets: n must be 125, 250 or 500");
}

}  // namespace

Vector vasicek_theta(int model) {
  const double kappa0 = 0.85837, alpha0 = 0.089102, sigma20 = 0.0021854;
  double f;
  switch (model) {
    case -2: f = 4.0; break;
    case 0: f = 1.0; break;
    case 2: f = 0.25; break;
    default: throw DomainError("presets: Vasicek model in {-2, 0, 2}");
  }
  Vector th(3);
  th << kappa0 * f, alpha0, sigma20 * f;
  return th;
}

Region vasicek_region(int model) {
  switch (model) {
    case -2: return Region(0.035, 0.25, -0.03, 0.03);
    case 0: return Region(0.03, 0.22, -0.02, 0.02);
    case 2: return Region(0.02, 0.22, -0.009, 0.009);
  }
  throw DomainError("presets: Vasicek model in {-2, 0, 2}");
}

BandwidthSet table1_bandwidths(int model, int n) {
  static const std::vector<std::vector<std::vector<double>>> sets = {
      // model -2
      {{0.030, 0.032, 0.034, 0.036, 0.0386, 0.041},
       {0.022, 0.023, 0.024, 0.026, 0.0269, 0.0284},
       {0.02, 0.021, 0.022, 0.023, 0.0245, 0.0258}},
      // model 0
      {{0.016, 0.017, 0.019, 0.020, 0.022, 0.024},
       {0.014, 0.015, 0.017, 0.018, 0.02, 0.022},
       {0.01, 0.011, 0.012, 0.013, 0.015, 0.016}},
      // model 2
      {{0.008, 0.009, 0.010, 0.011, 0.013, 0.014},
       {0.006, 0.007, 0.008, 0.009, 0.01, 0.011},
       {0.004, 0.005, 0.0054, 0.0063, 0.0074, 0.0086}}};
  int m;
  switch (model) {
    case -2: m = 0; break;
    case 0: m = 1; break;
    case 2: m = 2; break;
    default: throw DomainError("presets: Vasicek model in {-2, 0, 2}");
  }
  return BandwidthSet(sets[m][n_slot(n)]);
}

Vector cir_theta(int k) {
  const double alpha = 0.09045;
  double kappa, sigma2;
  switch (k) {
    case 0: kappa = 0.89218; sigma2 = 0.032742; break;
    case 1: kappa = 0.44609; sigma2 = 0.016371; break;
    case 2: kappa = 0.22305; sigma2 = 0.008186; break;
    default: throw DomainError("presets: CIR model in {0, 1, 2}");
  }
  Vector th(3);
  th << kappa, alpha, sigma2;
  return th;
}

Region cir_region(int k) {
  switch (k) {
    case 0: return Region(0.015, 0.25, -0.015, 0.015);
    case 1: return Region(0.015, 0.25, -0.012, 0.012);
    case 2: return Region(0.015, 0.25, -0.008, 0.008);
  }
  throw DomainError("presets: CIR model in {0, 1, 2}");
}

BandwidthSet table3_bandwidths(int k, int n) {
  static const std::vector<std::vector<std::vector<double>>> sets = {
      // CIR 0
      {{0.022, 0.025, 0.029, 0.033, 0.038, 0.044},
       {0.018, 0.021, 0.024, 0.028, 0.032, 0.037},
       {0.016, 0.018, 0.021, 0.024, 0.027, 0.031}},
      // CIR 1
      {{0.017, 0.02, 0.022, 0.026, 0.03, 0.035},
       {0.014, 0.016, 0.018, 0.021, 0.024, 0.028},
       {0.012, 0.014, 0.016, 0.018, 0.021, 0.024}},
      // CIR 2
      {{0.012, 0.014, 0.016, 0.018, 0.021, 0.024},
       {0.01, 0.012, 0.013, 0.015, 0.017, 0.02},
       {0.008, 0.009, 0.011, 0.012, 0.014, 0.016}}};
  if (k < 0 || k > 2) throw DomainError("presets: CIR model in {0, 1, 2}");
  return BandwidthSet(sets[k][n_slot(n)]);
}

Region power_region() { return Region(0.015, 0.25, -0.015, 0.015); }

BandwidthSet table4a_bandwidths(int n) {
  switch (n_slot(n)) {
    case 0: return bw({0.0199, 0.0219, 0.0241, 0.0265, 0.0291});
    case 1: return bw({0.0141, 0.0158, 0.0177, 0.0199, 0.0223});
    default: return bw({0.0113, 0.0126, 0.0141, 0.0157, 0.0175});
  }
}

StudyDesign vasicek_table1(int model, int n, bool full_scale) {
  StudyDesign d;
  d.truth = DiffusionModel::vasicek();
  d.theta_truth = vasicek_theta(model);
  d.null_family = Family::Vasicek;
  d.n = n;
  d.region = vasicek_region(model);
  d.fixed_set = table1_bandwidths(model, n);
  d.B = full_scale ? 250 : 99;
  d.n_reps = full_scale ? 500 : 200;
  return d;
}

StudyDesign cir_table3(int k, int n, bool full_scale) {
  StudyDesign d;
  d.truth = DiffusionModel::cir();
  d.theta_truth = cir_theta(k);
  d.null_family = Family::CIR;
  d.n = n;
  d.region = cir_region(k);
  d.fixed_set = table3_bandwidths(k, n);
  d.B = full_scale ? 250 : 99;
  d.n_reps = full_scale ? 500 : 200;
  return d;
}

StudyDesign power_table4a(int n, bool full_scale) {
  StudyDesign d;
  d.truth = DiffusionModel::cir();
  d.theta_truth = cir_theta(0);
  d.null_family = Family::Vasicek;
  d.n = n;
  d.region = power_region();
  d.fixed_set = table4a_bandwidths(n);
  d.B = full_scale ? 250 : 99;
  d.n_reps = full_scale ? 500 : 100;
  return d;
}

StudyDesign by_name(const std::string& name, int variant_id, int n, bool full_scale) {
  if (name == "vasicek-table1") return vasicek_table1(variant_id, n, full_scale);
  if (name == "cir-table3") return cir_table3(variant_id, n, full_scale);
  if (name == "power-table4a") return power_table4a(n, full_scale);
  throw DomainError("unknown study preset: " + name);
}

}  // namespace presets

}  // namespace difftest
