#include "difftest/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "difftest/numerics.hpp"
#include "difftest/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace difftest {

double p_value(double observed, const std::vector<double>& replicates) {
  if (replicates.empty()) throw DomainError("p_value: empty replicate vector");
  long count = 0;
  for (double r : replicates)
    if (r >= observed) ++count;
  return static_cast<double>(1 + count) / (replicates.size() + 1);
}

int critical_index(int B, double alpha) {
  const int idx = static_cast<int>(std::floor(B * (1.0 - alpha)));  // 0-based
  return std::min(idx, B - 1);
}

namespace {

struct ReplicateOutcome {
  bool ok = false;
  double l_n = 0.0;
  Vector per_h;
};

ReplicateOutcome run_replicate(const DiffusionModel& model, const Vector& theta,
                               int n, double delta, const BootstrapConfig& cfg,
                               uint64_t b, int attempt) {
  ReplicateOutcome out;
  Rng rng = Rng::stream(cfg.seed, {0xB007u, b, static_cast<uint64_t>(attempt)});
  const double x0 = sample_stationary(model, theta, rng);
  const ObservedPath path =
      simulate_path(model, theta, n, delta, x0, rng, cfg.euler_substeps);

  const FitResult refit = fit_mle(model, path);
  if (!refit.converged) return out;
  try {
    validate_params(model, refit.theta_hat);
    BandwidthSet hs = cfg.bandwidths;
    if (cfg.reselect)
      hs = build_set(scott_rule(path), BandwidthScheme::RefThirdSmallest,
                     cfg.reselect_j, cfg.reselect_a);
    if (hs.size() != cfg.bandwidths.size()) return out;

    const TestStatEngine engine(path, model, refit.theta_hat);
    const auto per_h = engine.all(hs, cfg.region, cfg.grid, cfg.variant, cfg.mode);
    out.per_h.resize(per_h.size());
    for (size_t k = 0; k < per_h.size(); ++k) out.per_h(k) = per_h[k].standardized;
    out.l_n = l_n(per_h);
    out.ok = std::isfinite(out.l_n);
  } catch (const std::exception&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

BootstrapResult bootstrap_test(const ObservedPath& path, const DiffusionModel& model,
                               const Vector& theta_fitted, const BootstrapConfig& cfg) {
  if (cfg.B < 99) throw DomainError("bootstrap: B >= 99 required");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5))
    throw DomainError("bootstrap: alpha in (0, 0.5) required");
  validate_params(model, theta_fitted);

  BootstrapResult out;
  out.alpha = cfg.alpha;
  out.B = cfg.B;

  const TestStatEngine engine(path, model, theta_fitted);
  out.observed_per_h =
      engine.all(cfg.bandwidths, cfg.region, cfg.grid, cfg.variant, cfg.mode);
  out.observed_l_n = l_n(out.observed_per_h);

  const int J = cfg.bandwidths.size();
  std::vector<ReplicateOutcome> slots(cfg.B);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
#endif
  for (int b = 0; b < cfg.B; ++b) {
    ReplicateOutcome r = run_replicate(model, theta_fitted, path.n(), path.delta,
                                       cfg, static_cast<uint64_t>(b + 1), 0);
    if (!r.ok)
      r = run_replicate(model, theta_fitted, path.n(), path.delta, cfg,
                        static_cast<uint64_t>(b + 1), 1);
    slots[b] = std::move(r);
  }

  std::vector<double> reps;
  reps.reserve(cfg.B);
  std::vector<const Vector*> per_h_rows;
  for (const auto& s : slots) {
    if (s.ok) {
      reps.push_back(s.l_n);
      per_h_rows.push_back(&s.per_h);
    } else {
      ++out.fit_failures;
    }
  }
  if (out.fit_failures * 10 > cfg.B)
    throw NumericError("bootstrap: more than 10% replicate failures");

  out.B_effective = static_cast<int>(reps.size());
  out.replicate_per_h.resize(out.B_effective, J);
  for (int i = 0; i < out.B_effective; ++i)
    out.replicate_per_h.row(i) = per_h_rows[i]->transpose();

  out.replicates = reps;
  std::sort(out.replicates.begin(), out.replicates.end());
  out.critical_value = out.replicates[critical_index(out.B_effective, cfg.alpha)];
  out.p_value = p_value(out.observed_l_n, out.replicates);
  out.reject = out.observed_l_n >= out.critical_value;
  return out;
}

}  // namespace difftest
