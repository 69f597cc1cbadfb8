#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "difftest/kernel.hpp"
#include "difftest/models.hpp"
#include "difftest/numerics.hpp"
#include "difftest/rng.hpp"
#include "helpers.hpp"

using namespace difftest;

namespace {

Vector vasicek0() {
  Vector th(3);
  th << 0.85837, 0.089102, 0.0021854;
  return th;
}

Vector cir0() {
  Vector th(3);
  th << 0.89218, 0.09045, 0.032742;
  return th;
}

constexpr double kDelta = 1.0 / 12.0;

}  // namespace

TEST_CASE("family metadata") {
  CHECK(param_dim(Family::Vasicek) == 3);
  CHECK(param_dim(Family::CIR) == 3);
  CHECK(param_dim(Family::ICIR) == 3);
  CHECK(param_dim(Family::CEV) == 4);
  CHECK(param_dim(Family::NLDrift) == 5);
  CHECK(density_kind(Family::Vasicek) == DensityKind::ExactClosedForm);
  CHECK(density_kind(Family::CIR) == DensityKind::ExactClosedForm);
  CHECK(density_kind(Family::ICIR) == DensityKind::EulerApprox);
  CHECK(density_kind(Family::CEV) == DensityKind::EulerApprox);
  CHECK(density_kind(Family::NLDrift) == DensityKind::EulerApprox);
  CHECK(family_from_string("cev") == Family::CEV);
  CHECK_THROWS_AS(family_from_string("heston"), DomainError);
}

TEST_CASE("drift") {
  auto vas = DiffusionModel::vasicek();
  CHECK(drift(vas, 0.089102, vasicek0()) == doctest::Approx(0.0).epsilon(1e-15));

  auto cir = DiffusionModel::cir();
  CHECK(drift(cir, 0.05, cir0()) == doctest::Approx(0.036089).epsilon(1e-4));
  CHECK(drift(cir, 0.05, cir0()) ==
        doctest::Approx(0.89218 * 0.04045).epsilon(1e-14));

  auto nl = DiffusionModel::nldrift();
  Vector th(5);
  th << 0.2, -0.3, 0.5, -0.1, 1.0;
  CHECK(drift(nl, 1.0, th) == doctest::Approx(0.2 - 0.3 + 0.5 - 0.1).epsilon(1e-14));

  Vector bad = cir0();
  bad(0) = -1.0;
  CHECK_THROWS_AS(drift(cir, 0.05, bad), DomainError);
}

TEST_CASE("diffusion") {
  auto vas = DiffusionModel::vasicek();
  CHECK(diffusion(vas, -3.0, vasicek0()) ==
        doctest::Approx(std::sqrt(0.0021854)).epsilon(1e-14));

  // CEV with rho = 1/2 nests the CIR diffusion.
  auto cev = DiffusionModel::cev();
  auto cir = DiffusionModel::cir();
  Vector th_cev(4);
  th_cev << 0.89218, 0.09045, std::sqrt(0.032742), 0.5;
  for (double x : {0.02, 0.09, 0.3})
    CHECK(diffusion(cev, x, th_cev) ==
          doctest::Approx(diffusion(cir, x, cir0())).epsilon(1e-13));

  auto icir = DiffusionModel::icir();
  Vector th_icir(3);
  th_icir << 0.5, 0.4, 1.0;
  CHECK(diffusion(icir, 0.1, th_icir) == doctest::Approx(0.0316228).epsilon(1e-5));

  CHECK_THROWS_AS(diffusion(cir, 0.0, cir0()), DomainError);
}

TEST_CASE("vasicek transition density") {
  auto vas = DiffusionModel::vasicek();
  const Vector th = vasicek0();
  const double kappa = th(0), alpha = th(1), sigma2 = th(2);
  const double ec = std::exp(-kappa * kDelta);
  const double var = sigma2 * (1.0 - ec * ec) / (2.0 * kappa);

  // Conditional mean at x = alpha is alpha; density peaks at 1/sqrt(2 pi V).
  CHECK(transition_density(vas, alpha, alpha, kDelta, th) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI * var)).epsilon(1e-12));

  // Cross-check against an Euler simulation histogram with fine substeps.
  Rng rng(2027);
  const double x = alpha + 0.02;
  const double mean = alpha + (x - alpha) * ec;
  const int n_paths = 1000000, substeps = 100;
  const double dt = kDelta / substeps, sdt = std::sqrt(dt);
  const double sig = std::sqrt(sigma2);
  long hits = 0;
  const double band = 0.2 * std::sqrt(var);
  for (int p = 0; p < n_paths; ++p) {
    double z = x;
    for (int s = 0; s < substeps; ++s)
      z += kappa * (alpha - z) * dt + sig * sdt * rng.normal();
    if (std::abs(z - mean) <= band) ++hits;
  }
  const double p_band = static_cast<double>(hits) / n_paths;
  const double p_exact = std::erf(band / std::sqrt(2.0 * var));  // P(|Z| <= band)
  const double se = std::sqrt(p_exact * (1.0 - p_exact) / n_paths);
  CHECK(std::abs(p_band - p_exact) < 4.0 * se + 1e-4);  // O(dt) Euler bias margin

  // Never overflows in log scale for tiny steps.
  CHECK(std::isfinite(log_transition_density(vas, alpha, alpha, 1e-5, th)));
}

TEST_CASE("cir transition density integrates to one") {
  auto cir = DiffusionModel::cir();
  const Vector th = cir0();
  for (double x : {0.05, 0.09, 0.2}) {
    const double mass = integrate(
        [&](double y) { return transition_density(cir, y, x, kDelta, th); }, 1e-9,
        0.6, 1e-9);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Small-delta regime stays finite through the log-scale Bessel.
  CHECK(std::isfinite(log_transition_density(cir, 0.09, 0.09, 1e-4, th)));
  CHECK_THROWS_AS(log_transition_density(cir, 0.09, -0.01, kDelta, th), DomainError);
  CHECK(transition_density(cir, -0.5, 0.09, kDelta, th) == 0.0);
}

TEST_CASE("stationary density closed forms and the forward-equation route") {
  auto vas = DiffusionModel::vasicek();
  const Vector thv = vasicek0();
  const double sd = std::sqrt(thv(2) / (2.0 * thv(0)));
  // Spread of the stationary law from the quoted parameters (the formula, not
  // the paper's misprinted 0.001226).
  CHECK(thv(2) / (2.0 * thv(0)) == doctest::Approx(0.0012730).epsilon(1e-4));

  // Generic Kolmogorov-forward evaluation matches the normal density.
  for (int i = 0; i <= 20; ++i) {
    const double x = thv(1) - 3.3 * sd + 6.6 * sd * i / 20.0;  // 99.9% mass
    CHECK(stationary_density_generic(vas, x, thv) ==
          doctest::Approx(stationary_density(vas, x, thv)).epsilon(1e-8));
  }

  auto cir = DiffusionModel::cir();
  const Vector thc = cir0();
  for (int i = 0; i <= 20; ++i) {
    const double x = 0.02 + 0.2 * i / 20.0;
    const double closed = stationary_density(cir, x, thc);
    CHECK(stationary_density_generic(cir, x, thc) ==
          doctest::Approx(closed).epsilon(1e-6));
  }

  // Normalization for every family.
  CHECK(oracles::romberg([&](double x) { return stationary_density(vas, x, thv); },
                         thv(1) - 8 * sd, thv(1) + 8 * sd) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(integrate([&](double x) { return stationary_density(cir, x, thc); }, 1e-9,
                  0.6, 1e-10) == doctest::Approx(1.0).epsilon(1e-6));

  auto icir = DiffusionModel::icir();
  Vector th_icir(3);
  th_icir << 0.5, 0.4, 1.0;  // sigma^2 > kappa alpha: mean-reverting verbatim drift
  const auto tab_icir = tabulate_stationary(icir, th_icir);
  double mass = 0.0;
  for (int i = 0; i + 1 < tab_icir.grid.size(); ++i)
    mass += 0.5 * (tab_icir.density(i) + tab_icir.density(i + 1)) *
            (tab_icir.grid(i + 1) - tab_icir.grid(i));
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

  auto cev = DiffusionModel::cev();
  Vector th_cev(4);
  th_cev << 0.5, 0.08, 0.7, 1.2;
  CHECK(integrate([&](double x) { return stationary_density(cev, x, th_cev); },
                  1e-6, 3.0, 1e-9) == doctest::Approx(1.0).epsilon(1e-4));

  auto nl = DiffusionModel::nldrift();
  Vector th_nl(5);
  th_nl << 0.0005, -0.01, 0.2, -1.2, 0.8;
  CHECK(integrate([&](double x) { return stationary_density(nl, x, th_nl); }, 1e-6,
                  2.0, 1e-9) == doctest::Approx(1.0).epsilon(1e-4));

  // Non-integrable candidate: explosive drift.
  Vector th_bad(5);
  th_bad << 0.0005, 0.01, 0.2, 5.0, 0.1;
  CHECK_THROWS_AS(tabulate_stationary(nl, th_bad), NumericError);
}

TEST_CASE("simulate_path") {
  auto vas = DiffusionModel::vasicek();
  Vector th = vasicek0();

  // sigma2 = 0: deterministic mean-reverting recursion.
  Vector th0 = th;
  th0(2) = 0.0;
  Rng rng(1);
  const ObservedPath det = simulate_path(vas, th0, 10, kDelta, 0.2, rng);
  const double ec = std::exp(-th(0) * kDelta);
  double x = 0.2;
  for (int t = 1; t <= 10; ++t) {
    x = th(1) + (x - th(1)) * ec;
    CHECK(det.values(t) == doctest::Approx(x).epsilon(1e-14));
  }

  // Ergodic moments on a long path.
  Rng rng2(4242);
  const ObservedPath longp = simulate_path(vas, th, 100000, kDelta, th(1), rng2);
  const double m = longp.values.mean();
  const double v = (longp.values - m).square().mean();
  const double ve = th(2) / (2.0 * th(0));
  const double rho = std::exp(-th(0) * kDelta);
  const double se_mean =
      std::sqrt(ve * (1.0 + rho) / (1.0 - rho) / longp.values.size());
  CHECK(std::abs(m - th(1)) < 3.0 * se_mean);
  CHECK(v == doctest::Approx(ve).epsilon(0.10));

  // CIR paths stay positive (Feller: 2 kappa alpha = 0.1614 > sigma2 = 0.0327).
  auto cir = DiffusionModel::cir();
  CHECK(2.0 * cir0()(0) * cir0()(1) > cir0()(2));
  Rng rng3(9);
  const ObservedPath cp = simulate_path(cir, cir0(), 10000, kDelta, 0.09, rng3);
  CHECK(cp.values.minCoeff() > 0.0);

  // Euler clamping is counted for positive-state families.
  auto cev = DiffusionModel::cev();
  Vector th_cev(4);
  th_cev << 0.5, 0.08, 3.0, 0.5;  // large noise: excursions below the floor
  Rng rng4(13);
  const ObservedPath ep = simulate_path(cev, th_cev, 500, kDelta, 0.001, rng4);
  CHECK(ep.clamp_count > 0);
  CHECK(ep.values.minCoeff() >= 1e-7);
}

TEST_CASE("sample_stationary") {
  auto vas = DiffusionModel::vasicek();
  const Vector th = vasicek0();
  Rng rng(2029);
  const int n = 100000;
  std::vector<double> draws(n);
  for (auto& d : draws) d = sample_stationary(vas, th, rng);
  const double ve = th(2) / (2.0 * th(0));
  CHECK(oracles::mean(draws) == doctest::Approx(th(1)).epsilon(0.005));
  CHECK(oracles::variance(draws) == doctest::Approx(ve).epsilon(0.02));

  auto cir = DiffusionModel::cir();
  for (int i = 0; i < 2000; ++i) CHECK(sample_stationary(cir, cir0(), rng) > 0.0);

  // Tabulated inverse-CDF sampler agrees with the exact normal sampler in
  // distribution (two-sample KS below the 1% critical value).
  const auto tab = tabulate_stationary(vas, th);
  const int m = 20000;
  std::vector<double> a(m), b(m);
  for (int i = 0; i < m; ++i) {
    a[i] = tab.sample(rng);
    b[i] = sample_stationary(vas, th, rng);
  }
  const double ks = oracles::ks_two_sample(a, b);
  const double crit1 = 1.628 * std::sqrt(2.0 / m);
  CHECK(ks < crit1);
}

TEST_CASE("one-step samplers match the closed-form transition densities") {
  // 10^6 draws, 50 bins: sup |observed - expected| <= 5 binomial SEs.
  struct Case {
    DiffusionModel model;
    Vector theta;
    double x;
  };
  const std::vector<Case> cases = {{DiffusionModel::vasicek(), vasicek0(), 0.11},
                                   {DiffusionModel::cir(), cir0(), 0.07}};
  for (const auto& c : cases) {
    CAPTURE(family_name(c.model.family));
    Rng rng(31415);
    const int n = 1000000, bins = 50;
    // Bin edges around the conditional law.
    const double mean = c.x + drift(c.model, c.x, c.theta) * kDelta;
    const double spread = 4.5 * diffusion(c.model, c.x, c.theta) * std::sqrt(kDelta);
    const double lo = mean - spread, hi = mean + spread;
    std::vector<long> counts(bins, 0);
    for (int i = 0; i < n; ++i) {
      const double y = sample_transition(c.model, c.x, kDelta, c.theta, rng);
      if (y >= lo && y < hi)
        ++counts[static_cast<int>((y - lo) / (hi - lo) * bins)];
    }
    double worst = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double a0 = lo + (hi - lo) * b / bins;
      const double a1 = lo + (hi - lo) * (b + 1) / bins;
      const double p = integrate(
          [&](double y) { return transition_density(c.model, y, c.x, kDelta, c.theta); },
          a0, a1, 1e-11);
      const double se = std::sqrt(p * (1.0 - p) * n);
      worst = std::max(worst, std::abs(counts[b] - p * n) / se);
    }
    CHECK(worst <= 5.0);
  }
}

TEST_CASE("euler pseudo-density converges to the exact vasicek density") {
  auto vas = DiffusionModel::vasicek();
  const Vector th = vasicek0();
  const double x = 0.1;
  const double ec = std::exp(-th(0) * kDelta);
  const double mean = th(1) + (x - th(1)) * ec;
  const double sd = std::sqrt(th(2) * (1.0 - ec * ec) / (2.0 * th(0)));
  auto iae = [&](int steps) {
    double acc = 0.0;
    const int g = 160;
    for (int i = 0; i < g; ++i) {
      const double y = mean - 6.0 * sd + 12.0 * sd * (i + 0.5) / g;
      acc += std::abs(euler_density(vas, y, x, kDelta, th, steps) -
                      transition_density(vas, y, x, kDelta, th)) *
             12.0 * sd / g;
    }
    return acc;
  };
  const double e1 = iae(1), e10 = iae(10), e100 = iae(100);
  CHECK(e1 > e10);
  CHECK(e10 > e100);
}

TEST_CASE("vasicek closed-form fit") {
  auto vas = DiffusionModel::vasicek();
  const Vector th = vasicek0();

  // Noiseless identification from a deterministic path.
  Vector th0 = th;
  th0(2) = 0.0;
  Rng rng(3);
  const ObservedPath det = simulate_path(vas, th0, 50, kDelta, 0.2, rng);
  const FitResult f0 = fit_mle(vas, det);
  CHECK(f0.converged);
  CHECK(f0.theta_hat(1) == doctest::Approx(th(1)).epsilon(1e-10));
  CHECK(f0.theta_hat(0) == doctest::Approx(th(0)).epsilon(1e-6));

  // Monte Carlo quality at n = 2000: alpha within 20%, sigma2 within 10%,
  // in at least 90% of replicates; kappa biased upward in the median.
  int ok_alpha = 0, ok_sigma2 = 0;
  std::vector<double> kappas;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    Rng r = Rng::stream(6000 + rep, {2});
    const ObservedPath p =
        simulate_path(vas, th, 2000, kDelta, sample_stationary(vas, th, r), r);
    const FitResult f = fit_mle(vas, p);
    REQUIRE(f.converged);
    ok_alpha += std::abs(f.theta_hat(1) - th(1)) <= 0.2 * th(1);
    ok_sigma2 += std::abs(f.theta_hat(2) - th(2)) <= 0.1 * th(2);
    kappas.push_back(f.theta_hat(0));
  }
  CHECK(ok_alpha >= 45);
  CHECK(ok_sigma2 >= 45);
  std::nth_element(kappas.begin(), kappas.begin() + reps / 2, kappas.end());
  CHECK(kappas[reps / 2] >= th(0));

  // The closed form dominates a brute-force grid maximization of the same
  // likelihood.
  Rng r2(606);
  const ObservedPath p2 =
      simulate_path(vas, th, 400, kDelta, sample_stationary(vas, th, r2), r2);
  const FitResult f2 = fit_mle(vas, p2);
  double grid_best = -1e300;
  Vector grid_arg(3);
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j)
      for (int k = -4; k <= 4; ++k) {
        Vector cand(3);
        cand << th(0) * (1.0 + 0.2 * i), th(1) * (1.0 + 0.1 * j),
            th(2) * (1.0 + 0.2 * k);
        if (!(cand(0) > 0.0 && cand(2) > 0.0)) continue;
        const double ll = fit_loglik(vas, p2, cand);
        if (ll > grid_best) {
          grid_best = ll;
          grid_arg = cand;
        }
      }
  CHECK(f2.loglik >= grid_best - 1e-9);
}

TEST_CASE("cir numerical fit attains the exact-likelihood optimum") {
  auto cir = DiffusionModel::cir();
  const Vector th = cir0();
  Rng rng(11);
  const ObservedPath p =
      simulate_path(cir, th, 300, kDelta, sample_stationary(cir, th, rng), rng);
  const FitResult f = fit_mle(cir, p);
  CHECK(f.converged);
  CHECK(f.method == FitMethod::NumericalExactLik);
  const double ll_true = fit_loglik(cir, p, th);
  CHECK(f.loglik >= ll_true - 1e-6);
  CHECK(f.theta_hat(1) == doctest::Approx(th(1)).epsilon(0.5));
}

TEST_CASE("euler pseudo-likelihood fit for the approximate families") {
  auto cev = DiffusionModel::cev();
  Vector th(4);
  th << 0.6, 0.09, 0.35, 0.75;
  Rng rng(21);
  const ObservedPath p =
      simulate_path(cev, th, 600, kDelta, 0.09, rng);
  const FitResult f = fit_mle(cev, p);
  CHECK(f.converged);
  CHECK(f.method == FitMethod::EulerPseudoLik);
  // The pseudo-likelihood at the fit dominates the pseudo-likelihood at truth.
  CHECK(f.loglik >= fit_loglik(cev, p, th) - 1e-6);
}
