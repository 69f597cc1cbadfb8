#include "difftest/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace difftest {

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa,
               double b, double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a, double fa,
                     double b, double fb, double m, double fm, double whole,
                     double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, fa, m, fm, lm, flm);
  const double right = simpson(f, m, fm, b, fb, rm, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

// Gauss-Legendre nodes/weights on [-1,1].
constexpr double kGl5x[] = {0.0, 0.5384693101056831, 0.9061798459386640};
constexpr double kGl5w[] = {0.5688888888888889, 0.4786286704993665, 0.2369268850561891};
constexpr double kGl10x[] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                             0.8650633666889845, 0.9739065285171717};
constexpr double kGl10w[] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                             0.1494513491505806, 0.0666713443086881};
constexpr double kGl20x[] = {0.0765265211334973, 0.2277858511416451, 0.3737060887154195,
                             0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
                             0.8391169718222188, 0.9122344282513259, 0.9639719272779138,
                             0.9931285991850949};
constexpr double kGl20w[] = {0.1527533871307258, 0.1491729864726037, 0.1420961093183820,
                             0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
                             0.0832767415767048, 0.0626720483341091, 0.0406014298003869,
                             0.0176140071391521};

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol, int max_depth) {
  if (a == b) return 0.0;
  // Seed with 16 panels so localized mass inside [a,b] is not missed by the
  // first Simpson estimate.
  const int panels = 16;
  const double dz = (b - a) / panels;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double x0 = a + i * dz, x1 = a + (i + 1) * dz;
    const double f0 = f(x0), f1 = f(x1);
    const double m = 0.5 * (x0 + x1), fm = f(m);
    const double whole = simpson(f, x0, f0, x1, f1, m, fm);
    total += adaptive_step(f, x0, f0, x1, f1, m, fm, whole, tol / panels,
                           max_depth);
  }
  return total;
}

double gauss_legendre(const std::function<double(double)>& f, double a, double b,
                      int points) {
  const double c = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  if (points <= 5) {
    sum = kGl5w[0] * f(c);
    for (int i = 1; i < 3; ++i)
      sum += kGl5w[i] * (f(c - half * kGl5x[i]) + f(c + half * kGl5x[i]));
  } else if (points <= 10) {
    for (int i = 0; i < 5; ++i)
      sum += kGl10w[i] * (f(c - half * kGl10x[i]) + f(c + half * kGl10x[i]));
  } else {
    for (int i = 0; i < 10; ++i)
      sum += kGl20w[i] * (f(c - half * kGl20x[i]) + f(c + half * kGl20x[i]));
  }
  return sum * half;
}

double log_bessel_i(double nu, double z) {
  if (!(nu > -1.0) || z < 0.0 || !std::isfinite(z))
    throw DomainError("log_bessel_i: need nu > -1 and z >= 0");
  if (z == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();

  // Hankel expansion when the argument dominates the order; truncated at the
  // smallest term, which keeps the relative error below ~1e-9 for z >= 100.
  if (z >= 100.0 && 4.0 * nu * nu <= z) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0, prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 20; ++k) {
      const double num = mu - (2.0 * k - 1.0) * (2.0 * k - 1.0);
      term *= -num / (8.0 * z * k);
      if (std::abs(term) >= prev) break;
      sum += term;
      prev = std::abs(term);
    }
    return z - 0.5 * std::log(2.0 * M_PI * z) + std::log(sum);
  }

  // Power series sum_m (z^2/4)^m / (m! Gamma(nu+m+1)), factored by the m=0 term.
  const double x = 0.25 * z * z;
  double term = 1.0, sum = 1.0, log_scale = 0.0;
  const int peak = static_cast<int>(0.5 * (std::sqrt(nu * nu + z * z) - nu)) + 2;
  for (int m = 1; m < 100000; ++m) {
    term *= x / (m * (nu + m));
    sum += term;
    if (sum > 1e280) {
      sum *= 1e-280;
      term *= 1e-280;
      log_scale += 280.0 * std::log(10.0);
    }
    if (m > peak && term < sum * 1e-17) break;
  }
  return nu * std::log(0.5 * z) - std::lgamma(nu + 1.0) + std::log(sum) + log_scale;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p outside (0,1)");
  // Acklam coefficients.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(2.0 * M_PI * var);
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f,
                             const Vector& x0, const NelderMeadOptions& opts) {
  const int d = static_cast<int>(x0.size());
  NelderMeadResult out;
  out.x = x0;

  auto run = [&](Vector start) {
    std::vector<Vector> pts(d + 1, start);
    std::vector<double> fv(d + 1);
    for (int i = 0; i < d; ++i) {
      pts[i + 1](i) += (start(i) != 0.0 ? opts.initial_step * std::abs(start(i))
                                        : opts.initial_step);
    }
    for (int i = 0; i <= d; ++i) fv[i] = f(pts[i]);

    std::vector<int> idx(d + 1);
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
      for (int i = 0; i <= d; ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
      const int best = idx[0], worst = idx[d], second = idx[d - 1];

      double diam = 0.0;
      for (int i = 1; i <= d; ++i)
        diam = std::max(diam, (pts[idx[i]] - pts[best]).cwiseAbs().maxCoeff());
      if (std::abs(fv[worst] - fv[best]) <=
              opts.f_tol * (1.0 + std::abs(fv[best])) &&
          diam <= opts.x_tol * (1.0 + pts[best].cwiseAbs().maxCoeff()))
        break;

      Vector centroid = Vector::Zero(d);
      for (int i = 0; i <= d; ++i)
        if (i != worst) centroid += pts[i];
      centroid /= d;

      auto try_point = [&](double coef) {
        Vector p = centroid + coef * (pts[worst] - centroid);
        return std::make_pair(p, f(p));
      };

      auto [xr, fr] = try_point(-1.0);  // reflection
      if (fr < fv[best]) {
        auto [xe, fe] = try_point(-2.0);  // expansion
        if (fe < fr) { pts[worst] = xe; fv[worst] = fe; }
        else { pts[worst] = xr; fv[worst] = fr; }
      } else if (fr < fv[second]) {
        pts[worst] = xr; fv[worst] = fr;
      } else {
        const bool outside = fr < fv[worst];
        auto [xc, fc] = try_point(outside ? -0.5 : 0.5);
        if (fc < std::min(fr, fv[worst])) {
          pts[worst] = xc; fv[worst] = fc;
        } else {  // shrink toward best
          for (int i = 0; i <= d; ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
            fv[i] = f(pts[i]);
          }
        }
      }
    }

    int best = 0;
    for (int i = 1; i <= d; ++i)
      if (fv[i] < fv[best]) best = i;
    return std::make_tuple(pts[best], fv[best], iter);
  };

  auto [x, fx, iters] = run(x0);
  out.iterations = iters;
  for (int r = 1; r <= opts.restarts; ++r) {
    auto [x2, fx2, iters2] = run(x);
    out.iterations += iters2;
    if (fx2 < fx) { x = x2; fx = fx2; }
  }
  out.x = x;
  out.fmin = fx;
  out.converged = out.iterations < (opts.restarts + 1) * opts.max_iterations;
  return out;
}

}  // namespace difftest
