#pragma once

#include <string>
#include <vector>

#include "difftest/types.hpp"

namespace difftest {

class Rng;

enum class Family { Vasicek, CIR, ICIR, CEV, NLDrift };
enum class DensityKind { ExactClosedForm, EulerApprox };
enum class FitMethod { ClosedForm, NumericalExactLik, EulerPseudoLik };

/// Parametric diffusion family dX = mu(X;theta) dt + sigma(X;theta) dB.
///
/// Parameter layouts:
///   Vasicek  (kappa, alpha, sigma2)   dX = kappa(alpha-X)dt + sigma dB
///   CIR      (kappa, alpha, sigma2)   dX = kappa(alpha-X)dt + sigma sqrt(X) dB
///   ICIR     (kappa, alpha, sigma)    dX = X{kappa-(sigma^2-kappa alpha)X}dt + sigma X^{3/2} dB
///   CEV      (kappa, alpha, sigma, rho)  dX = kappa(alpha-X)dt + sigma X^rho dB
///   NLDrift  (a_m1, a0, a1, a2, sigma)   dX = (a_m1/X + a0 + a1 X + a2 X^2)dt + sigma X^{3/2} dB
struct DiffusionModel {
  Family family = Family::Vasicek;

  explicit DiffusionModel(Family f) : family(f) {}
  static DiffusionModel vasicek() { return DiffusionModel(Family::Vasicek); }
  static DiffusionModel cir() { return DiffusionModel(Family::CIR); }
  static DiffusionModel icir() { return DiffusionModel(Family::ICIR); }
  static DiffusionModel cev() { return DiffusionModel(Family::CEV); }
  static DiffusionModel nldrift() { return DiffusionModel(Family::NLDrift); }
};

int param_dim(Family family);
const std::vector<std::string>& param_names(Family family);
DensityKind density_kind(Family family);
bool positive_state(Family family);
Family family_from_string(const std::string& name);
std::string family_name(Family family);

/// Throws DomainError when theta is outside the family's parameter domain.
/// Vasicek admits sigma2 = 0 (degenerate deterministic boundary).
void validate_params(const DiffusionModel& model, const Vector& theta);

double drift(const DiffusionModel& model, double x, const Vector& theta);
double diffusion(const DiffusionModel& model, double x, const Vector& theta);

/// p_theta(y | x, delta). Exact for Vasicek (Gaussian) and CIR (noncentral
/// chi-square, Bessel in log scale); Euler pseudo-density otherwise.
double transition_density(const DiffusionModel& model, double y, double x,
                          double delta, const Vector& theta);
double log_transition_density(const DiffusionModel& model, double y, double x,
                              double delta, const Vector& theta);

/// One-step Euler pseudo-density N(x + mu dt, sigma^2 dt) iterated `steps`
/// times via Chapman-Kolmogorov convolution on a grid (steps > 1).
double euler_density(const DiffusionModel& model, double y, double x,
                     double delta, const Vector& theta, int steps = 1);

/// Stationary density. Closed form for Vasicek (normal) and CIR (gamma);
/// the Kolmogorov-forward formula with numerical normalization otherwise.
double stationary_density(const DiffusionModel& model, double x, const Vector& theta);

/// Kolmogorov-forward evaluation xi(theta)/sigma^2(x) exp{int 2 mu/sigma^2}
/// for any family (cross-checks the closed forms).
double stationary_density_generic(const DiffusionModel& model, double x,
                                  const Vector& theta);

/// Tabulated stationary law on a grid (geometric for positive-state
/// families): density values and CDF for inverse-CDF sampling.
struct StationaryTable {
  Array grid;
  Array density;
  Array cdf;
  bool log_spaced = false;
  double sample(Rng& rng) const;
  double density_at(double x) const;
};
StationaryTable tabulate_stationary(const DiffusionModel& model, const Vector& theta,
                                    int grid_points = 4097);

ObservedPath simulate_path(const DiffusionModel& model, const Vector& theta, int n,
                           double delta, double x0, Rng& rng, int euler_substeps = 20);

double sample_stationary(const DiffusionModel& model, const Vector& theta, Rng& rng);

/// Exact draw from the one-step transition law (same schemes as simulate_path).
double sample_transition(const DiffusionModel& model, double x, double delta,
                         const Vector& theta, Rng& rng, int euler_substeps = 20);

struct FitResult {
  Vector theta_hat;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  FitMethod method = FitMethod::ClosedForm;
};

/// Maximum likelihood: closed-form AR(1) for Vasicek, numerical exact
/// likelihood for CIR, Euler pseudo-likelihood for the other families.
/// Likelihoods condition on the first observation.
FitResult fit_mle(const DiffusionModel& model, const ObservedPath& path);

/// Log-likelihood used by fit_mle at a given parameter value.
double fit_loglik(const DiffusionModel& model, const ObservedPath& path,
                  const Vector& theta);

}  // namespace difftest
