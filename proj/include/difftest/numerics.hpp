#pragma once

#include <cstdint>
#include <functional>

#include "difftest/types.hpp"

namespace difftest {

/// Adaptive Simpson quadrature of f over [a,b].
/// tol is an absolute tolerance on the whole interval.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10, int max_depth = 60);

/// Fixed-order Gauss-Legendre quadrature on [a,b]; exact for polynomials of
/// degree <= 2*points-1. points in {5, 10, 20}.
double gauss_legendre(const std::function<double(double)>& f, double a, double b,
                      int points = 10);

/// log of the modified Bessel function I_nu(z) for nu > -1, z >= 0.
/// Power series with rescaling; Hankel large-argument expansion when it is
/// the faster and accurate choice.
double log_bessel_i(double nu, double z);

/// Inverse standard normal CDF (Acklam's rational approximation plus one
/// Halley refinement; |error| < 1e-14 on (1e-300, 1-1e-16)).
double normal_quantile(double p);

double normal_pdf(double x, double mean, double var);
double log_normal_pdf(double x, double mean, double var);

uint64_t splitmix64(uint64_t x);

struct NelderMeadResult {
  Vector x;
  double fmin = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  double initial_step = 0.25;  // per-coordinate simplex offset
  double f_tol = 1e-10;        // spread of simplex values
  double x_tol = 1e-9;         // simplex diameter
  int max_iterations = 2000;
  int restarts = 1;            // re-run from the best point
};

/// Derivative-free simplex minimization.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f,
                             const Vector& x0, const NelderMeadOptions& opts = {});

}  // namespace difftest
