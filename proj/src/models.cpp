#include "difftest/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "difftest/numerics.hpp"
#include "difftest/rng.hpp"

namespace difftest {

namespace {

constexpr double kStateFloor = 1e-7;  // Euler positivity floor
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
  if (!ok) throw DomainError(msg);
}

struct CirStep {
  double ec, c, q, u;  // e^{-k d}, scale, Bessel order, noncentrality/2
};

CirStep cir_step(double x, double delta, const Vector& th) {
  const double kappa = th(0), alpha = th(1), sigma2 = th(2);
  CirStep s;
  s.ec = std::exp(-kappa * delta);
  s.c = 2.0 * kappa / (sigma2 * (1.0 - s.ec));
  s.q = 2.0 * kappa * alpha / sigma2 - 1.0;
  s.u = s.c * x * s.ec;
  return s;
}

double log_cir_density(double y, double x, double delta, const Vector& th) {
  if (!(y > 0.0)) return kNegInf;
  const CirStep s = cir_step(x, delta, th);
  const double v = s.c * y;
  const double z = 2.0 * std::sqrt(s.u * v);
  return std::log(s.c) - s.u - v + 0.5 * s.q * std::log(v / s.u) +
         log_bessel_i(s.q, z);
}

}  // namespace

int param_dim(Family family) {
  switch (family) {
    case Family::Vasicek: return 3;
    case Family::CIR: return 3;
    case Family::ICIR: return 3;
    case Family::CEV: return 4;
    case Family::NLDrift: return 5;
  }
  return 0;
}

const std::vector<std::string>& param_names(Family family) {
  static const std::vector<std::string> vasicek{"kappa", "alpha", "sigma2"};
  static const std::vector<std::string> cir{"kappa", "alpha", "sigma2"};
  static const std::vector<std::string> icir{"kappa", "alpha", "sigma"};
  static const std::vector<std::string> cev{"kappa", "alpha", "sigma", "rho"};
  static const std::vector<std::string> nl{"a_m1", "a0", "a1", "a2", "sigma"};
  switch (family) {
    case Family::Vasicek: return vasicek;
    case Family::CIR: return cir;
    case Family::ICIR: return icir;
    case Family::CEV: return cev;
    case Family::NLDrift: return nl;
  }
  return vasicek;
}

DensityKind density_kind(Family family) {
  return (family == Family::Vasicek || family == Family::CIR)
             ? DensityKind::ExactClosedForm
             : DensityKind::EulerApprox;
}

bool positive_state(Family family) { return family != Family::Vasicek; }

Family family_from_string(const std::string& name) {
  if (name == "vasicek") return Family::Vasicek;
  if (name == "cir") return Family::CIR;
  if (name == "icir") return Family::ICIR;
  if (name == "cev") return Family::CEV;
  if (name == "nldrift") return Family::NLDrift;
  throw DomainError("unknown model family: " + name);
}

std::string family_name(Family family) {
  switch (family) {
    case Family::Vasicek: return "vasicek";
    case Family::CIR: return "cir";
    case Family::ICIR: return "icir";
    case Family::CEV: return "cev";
    case Family::NLDrift: return "nldrift";
  }
  return "?";
}

void validate_params(const DiffusionModel& model, const Vector& theta) {
  require(theta.size() == param_dim(model.family), "theta: wrong dimension");
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    require(std::isfinite(theta(i)), "theta: non-finite entry");
  switch (model.family) {
    case Family::Vasicek:
      require(theta(0) > 0.0, "vasicek: kappa > 0");
      require(theta(2) >= 0.0, "vasicek: sigma2 >= 0");
      break;
    case Family::CIR:
      require(theta(0) > 0.0, "cir: kappa > 0");
      require(theta(1) > 0.0, "cir: alpha > 0");
      require(theta(2) > 0.0, "cir: sigma2 > 0");
      break;
    case Family::ICIR:
      require(theta(0) > 0.0, "icir: kappa > 0");
      require(theta(1) > 0.0, "icir: alpha > 0");
      require(theta(2) > 0.0, "icir: sigma > 0");
      break;
    case Family::CEV:
      require(theta(0) > 0.0, "cev: kappa > 0");
      require(theta(1) > 0.0, "cev: alpha > 0");
      require(theta(2) > 0.0, "cev: sigma > 0");
      require(theta(3) >= 0.0, "cev: rho >= 0");
      break;
    case Family::NLDrift:
      require(theta(4) > 0.0, "nldrift: sigma > 0");
      break;
  }
}

double drift(const DiffusionModel& model, double x, const Vector& theta) {
  validate_params(model, theta);
  switch (model.family) {
    case Family::Vasicek:
    case Family::CIR:
    case Family::CEV:
      return theta(0) * (theta(1) - x);
    case Family::ICIR: {
      const double kappa = theta(0), alpha = theta(1), sigma = theta(2);
      return x * (kappa - (sigma * sigma - kappa * alpha) * x);
    }
    case Family::NLDrift:
      return theta(0) / x + theta(1) + theta(2) * x + theta(3) * x * x;
  }
  return 0.0;
}

double diffusion(const DiffusionModel& model, double x, const Vector& theta) {
  validate_params(model, theta);
  double s = 0.0;
  switch (model.family) {
    case Family::Vasicek:
      s = std::sqrt(theta(2));
      break;
    case Family::CIR:
      s = std::sqrt(theta(2) * x);
      break;
    case Family::ICIR:
      s = theta(2) * std::pow(x, 1.5);
      break;
    case Family::CEV:
      s = theta(2) * std::pow(x, theta(3));
      break;
    case Family::NLDrift:
      s = theta(4) * std::pow(x, 1.5);
      break;
  }
  if (!(s > 0.0) && !(model.family == Family::Vasicek && theta(2) == 0.0))
    throw DomainError("diffusion: nonpositive value (x at or below boundary?)");
  return s;
}

double log_transition_density(const DiffusionModel& model, double y, double x,
                              double delta, const Vector& theta) {
  validate_params(model, theta);
  require(delta > 0.0, "transition_density: delta > 0");
  switch (model.family) {
    case Family::Vasicek: {
      const double kappa = theta(0), alpha = theta(1), sigma2 = theta(2);
      require(sigma2 > 0.0, "vasicek density: sigma2 > 0");
      const double ec = std::exp(-kappa * delta);
      const double mean = alpha + (x - alpha) * ec;
      const double var = sigma2 * (1.0 - ec * ec) / (2.0 * kappa);
      return log_normal_pdf(y, mean, var);
    }
    case Family::CIR:
      require(x > 0.0, "cir density: x > 0");
      return log_cir_density(y, x, delta, theta);
    default: {
      // Euler pseudo-density.
      if (positive_state(model.family) && !(y > 0.0)) return kNegInf;
      const double mu = drift(model, x, theta);
      const double s = diffusion(model, x, theta);
      return log_normal_pdf(y, x + mu * delta, s * s * delta);
    }
  }
}

double transition_density(const DiffusionModel& model, double y, double x,
                          double delta, const Vector& theta) {
  return std::exp(log_transition_density(model, y, x, delta, theta));
}

double euler_density(const DiffusionModel& model, double y, double x,
                     double delta, const Vector& theta, int steps) {
  validate_params(model, theta);
  require(steps >= 1, "euler_density: steps >= 1");
  const double dt = delta / steps;
  auto one = [&](double yy, double xx) {
    const double mu = drift(model, xx, theta);
    const double s = diffusion(model, xx, theta);
    return normal_pdf(yy, xx + mu * dt, s * s * dt);
  };
  if (steps == 1) return one(y, x);

  // Chapman-Kolmogorov convolution on a fixed grid spanning the reachable
  // range; the march is cached so a profile over y costs one march.
  static thread_local struct {
    bool valid = false;
    Family family;
    double x, delta;
    int steps;
    Vector theta;
    double lo, dz;
    Array f;
  } cache;
  if (!cache.valid || cache.family != model.family || cache.x != x ||
      cache.delta != delta || cache.steps != steps ||
      cache.theta.size() != theta.size() ||
      (cache.theta.array() != theta.array()).any()) {
    const double s0 = diffusion(model, x, theta);
    const double spread = 10.0 * s0 * std::sqrt(delta) +
                          2.0 * std::abs(drift(model, x, theta)) * delta;
    double lo = x - spread, hi = x + spread;
    if (positive_state(model.family)) lo = std::max(lo, kStateFloor);
    const int g = 801;
    Array grid(g), f(g);
    const double dz = (hi - lo) / (g - 1);
    for (int i = 0; i < g; ++i) {
      grid(i) = lo + i * dz;
      f(i) = one(grid(i), x);
    }
    Array mu_g(g), var_g(g);
    for (int j = 0; j < g; ++j) {
      mu_g(j) = grid(j) + drift(model, grid(j), theta) * dt;
      const double s = diffusion(model, grid(j), theta);
      var_g(j) = s * s * dt;
    }
    Array next(g);
    for (int step = 1; step < steps; ++step) {
      for (int i = 0; i < g; ++i) {
        double acc = 0.0;
        for (int j = 0; j < g; ++j) {
          if (f(j) > 0.0) {
            const double w = (j == 0 || j == g - 1) ? 0.5 : 1.0;
            acc += w * normal_pdf(grid(i), mu_g(j), var_g(j)) * f(j);
          }
        }
        next(i) = acc * dz;
      }
      f.swap(next);
    }
    cache.valid = true;
    cache.family = model.family;
    cache.x = x;
    cache.delta = delta;
    cache.steps = steps;
    cache.theta = theta;
    cache.lo = lo;
    cache.dz = dz;
    cache.f = f;
  }
  const int g = static_cast<int>(cache.f.size());
  const double pos = (y - cache.lo) / cache.dz;
  if (pos <= 0.0 || pos >= g - 1) return 0.0;
  const int j = static_cast<int>(pos);
  const double frac = pos - j;
  return cache.f(j) * (1.0 - frac) + cache.f(j + 1) * frac;
}

namespace {

// Interior anchor for the Kolmogorov-forward exponent integral.
double stationary_anchor(const DiffusionModel& model, const Vector& theta) {
  switch (model.family) {
    case Family::Vasicek:
    case Family::CIR:
    case Family::CEV:
    case Family::ICIR:
      return theta(1) > 0.0 ? theta(1) : 0.1;
    case Family::NLDrift:
      return 0.1;
  }
  return 0.1;
}

// exp-exponent E(x) = int_{x0}^{x} 2 mu / sigma^2, composite Gauss-Legendre.
// Positive-state families integrate in log coordinates so boundary-singular
// integrands stay smooth per panel.
double stationary_exponent(const DiffusionModel& model, const Vector& theta,
                           double x0, double x) {
  if (x == x0) return 0.0;
  auto f = [&](double t) {
    const double s = diffusion(model, t, theta);
    return 2.0 * drift(model, t, theta) / (s * s);
  };
  if (positive_state(model.family)) {
    auto g = [&](double s) {
      const double t = std::exp(s);
      return f(t) * t;
    };
    const double s0 = std::log(x0), s1 = std::log(x);
    const int pieces =
        std::clamp(static_cast<int>(std::abs(s1 - s0) * 64.0) + 8, 8, 100000);
    const double ds = (s1 - s0) / pieces;
    double acc = 0.0;
    for (int i = 0; i < pieces; ++i)
      acc += gauss_legendre(g, s0 + i * ds, s0 + (i + 1) * ds, 10);
    return acc;
  }
  const int pieces =
      std::clamp(static_cast<int>(std::abs(x - x0) * 512.0) + 8, 8, 100000);
  const double dz = (x - x0) / pieces;
  double acc = 0.0;
  for (int i = 0; i < pieces; ++i)
    acc += gauss_legendre(f, x0 + i * dz, x0 + (i + 1) * dz, 10);
  return acc;
}

struct GenericStationary {
  Array grid, log_unnorm;  // log of m(x) = exp(E)/sigma^2
  double log_norm;         // log integral of exp(log_unnorm)
  bool log_spaced = false;  // grid geometric (positive-state families)
};

GenericStationary build_generic_stationary(const DiffusionModel& model,
                                           const Vector& theta, int g) {
  const bool pos = positive_state(model.family);
  const double anchor = stationary_anchor(model, theta);
  double lo = pos ? anchor / 8.0 : anchor - 0.5;
  double hi = pos ? anchor * 8.0 : anchor + 0.5;

  auto log_m = [&](double x) {
    const double s = diffusion(model, x, theta);
    return stationary_exponent(model, theta, anchor, x) - 2.0 * std::log(s);
  };
  auto node = [&](double a, double b, double frac) {
    return pos ? a * std::pow(b / a, frac) : a + (b - a) * frac;
  };

  // Expand [lo, hi] until both tail-mass bounds are negligible against the
  // interior mass. Probes are geometric for positive-state families so peaks
  // stay resolved at any dynamic range.
  for (int iter = 0;; ++iter) {
    if (iter == 64)
      throw NumericError("stationary law: no integrable envelope found");
    const int probe = 129;
    std::vector<double> pt(probe), lm(probe);
    for (int i = 0; i < probe; ++i) {
      pt[i] = node(lo, hi, static_cast<double>(i) / (probe - 1));
      lm[i] = log_m(pt[i]);
    }
    const double peak = *std::max_element(lm.begin(), lm.end());
    if (!std::isfinite(peak))
      throw NumericError("stationary law: non-finite density candidate");
    double mass = 0.0;
    for (int i = 0; i + 1 < probe; ++i)
      mass += 0.5 * (pt[i + 1] - pt[i]) *
              (std::exp(lm[i] - peak) + std::exp(lm[i + 1] - peak));

    // Divergence guards: density climbing at an edge far from the anchor.
    if (lm[probe - 1] > peak - 0.5 && lm[probe - 1] >= lm[probe - 2] &&
        hi > 64.0 * std::max(std::abs(anchor), 1.0))
      throw NumericError("stationary law: divergent upper tail");
    if (!pos && lm[0] > peak - 0.5 && lm[0] >= lm[1] && lo < anchor - 64.0)
      throw NumericError("stationary law: divergent lower tail");

    // Decreasing-tail mass bounds relative to the interior mass.
    const double width = pos ? hi : hi - lo;
    const double tail_hi = std::exp(lm[probe - 1] - peak) * width;
    const double tail_lo = std::exp(lm[0] - peak) * (pos ? lo : width);
    bool grown = false;
    if (tail_hi > 1e-9 * mass) {
      hi = pos ? hi * 2.0 : hi + 0.5 * (hi - lo);
      grown = true;
      if (hi > 1e9) throw NumericError("stationary law: divergent upper tail");
    }
    if (tail_lo > 1e-9 * mass) {
      if (pos) {
        if (lo > 1e-12) {
          lo *= 0.25;
          grown = true;
        }
      } else {
        lo -= 0.5 * (hi - lo);
        grown = true;
      }
    }
    if (!grown) break;
  }

  GenericStationary out;
  out.log_spaced = pos;
  out.grid.resize(g);
  out.log_unnorm.resize(g);
  // Cumulative exponent along the grid, one Gauss-Legendre panel per cell.
  double e = stationary_exponent(model, theta, anchor, lo);
  for (int i = 0; i < g; ++i) {
    out.grid(i) = node(lo, hi, static_cast<double>(i) / (g - 1));
    if (i > 0)
      e += stationary_exponent(model, theta, out.grid(i - 1), out.grid(i));
    const double s = diffusion(model, out.grid(i), theta);
    out.log_unnorm(i) = e - 2.0 * std::log(s);
  }
  const double m = out.log_unnorm.maxCoeff();
  // Composite Simpson (g is odd) in the grid coordinate; geometric grids get
  // the log-coordinate jacobian.
  auto fval = [&](int i) {
    const double j = pos ? out.grid(i) : 1.0;
    return std::exp(out.log_unnorm(i) - m) * j;
  };
  const double step = pos ? std::log(out.grid(1) / out.grid(0))
                          : out.grid(1) - out.grid(0);
  double integral = 0.0;
  for (int i = 0; i + 2 < g; i += 2)
    integral += step / 3.0 * (fval(i) + 4.0 * fval(i + 1) + fval(i + 2));
  if (!(integral > 0.0) || !std::isfinite(integral))
    throw NumericError("stationary law: normalization failed");
  out.log_norm = m + std::log(integral);
  return out;
}

// Index of the grid node at or below x.
int grid_index(const Array& grid, bool log_spaced, double x) {
  const int g = static_cast<int>(grid.size());
  const double pos = log_spaced
                         ? std::log(x / grid(0)) / std::log(grid(1) / grid(0))
                         : (x - grid(0)) / (grid(1) - grid(0));
  return std::clamp(static_cast<int>(pos), 0, g - 2);
}

}  // namespace

double stationary_density_generic(const DiffusionModel& model, double x,
                                  const Vector& theta) {
  validate_params(model, theta);
  if (positive_state(model.family) && !(x > 0.0)) return 0.0;
  static thread_local struct {
    bool valid = false;
    Family family;
    Vector theta;
    GenericStationary tab;
  } cache;
  if (!cache.valid || cache.family != model.family ||
      cache.theta.size() != theta.size() ||
      (cache.theta.array() != theta.array()).any()) {
    cache.tab = build_generic_stationary(model, theta, 2049);
    cache.family = model.family;
    cache.theta = theta;
    cache.valid = true;
  }
  const auto& tab = cache.tab;
  if (x <= tab.grid(0) || x >= tab.grid(tab.grid.size() - 1)) return 0.0;
  // Exact exponent from the nearest grid node (no interpolation error).
  const int j = grid_index(tab.grid, tab.log_spaced, x);
  const double s = diffusion(model, x, theta);
  const double log_m = tab.log_unnorm(j) +
                       2.0 * std::log(diffusion(model, tab.grid(j), theta)) +
                       stationary_exponent(model, theta, tab.grid(j), x) -
                       2.0 * std::log(s);
  return std::exp(log_m - tab.log_norm);
}

double stationary_density(const DiffusionModel& model, double x, const Vector& theta) {
  validate_params(model, theta);
  switch (model.family) {
    case Family::Vasicek: {
      require(theta(2) > 0.0, "vasicek stationary law: sigma2 > 0");
      return normal_pdf(x, theta(1), theta(2) / (2.0 * theta(0)));
    }
    case Family::CIR: {
      if (!(x > 0.0)) return 0.0;
      const double shape = 2.0 * theta(0) * theta(1) / theta(2);
      const double rate = 2.0 * theta(0) / theta(2);
      return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) -
                      rate * x - std::lgamma(shape));
    }
    default:
      return stationary_density_generic(model, x, theta);
  }
}

StationaryTable tabulate_stationary(const DiffusionModel& model, const Vector& theta,
                                    int grid_points) {
  validate_params(model, theta);
  const GenericStationary gs = build_generic_stationary(model, theta, grid_points);
  StationaryTable t;
  t.grid = gs.grid;
  t.log_spaced = gs.log_spaced;
  t.density = (gs.log_unnorm - gs.log_norm).exp();
  t.cdf.resize(grid_points);
  t.cdf(0) = 0.0;
  for (int i = 1; i < grid_points; ++i)
    t.cdf(i) = t.cdf(i - 1) + 0.5 * (t.grid(i) - t.grid(i - 1)) *
                                  (t.density(i - 1) + t.density(i));
  t.cdf /= t.cdf(grid_points - 1);
  return t;
}

double StationaryTable::sample(Rng& rng) const {
  const double u = rng.uniform();
  const double* b = cdf.data();
  const double* e = b + cdf.size();
  const int j = std::max<int>(1, static_cast<int>(std::lower_bound(b, e, u) - b));
  const double c0 = cdf(j - 1), c1 = cdf(j);
  const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
  return grid(j - 1) + frac * (grid(j) - grid(j - 1));
}

double StationaryTable::density_at(double x) const {
  if (x <= grid(0) || x >= grid(grid.size() - 1)) return 0.0;
  const int j = grid_index(grid, log_spaced, x);
  const double frac = (x - grid(j)) / (grid(j + 1) - grid(j));
  return density(j) * (1.0 - frac) + density(j + 1) * frac;
}

double sample_transition(const DiffusionModel& model, double x, double delta,
                         const Vector& theta, Rng& rng, int euler_substeps) {
  switch (model.family) {
    case Family::Vasicek: {
      const double kappa = theta(0), alpha = theta(1), sigma2 = theta(2);
      const double ec = std::exp(-kappa * delta);
      const double mean = alpha + (x - alpha) * ec;
      const double sd = std::sqrt(sigma2 * (1.0 - ec * ec) / (2.0 * kappa));
      return mean + sd * rng.normal();
    }
    case Family::CIR: {
      // Poisson mixture of central chi-squares.
      const CirStep s = cir_step(x, delta, theta);
      const double df = 2.0 * (s.q + 1.0);
      const long npois = rng.poisson(s.u);
      const double chi2 = rng.gamma(0.5 * df + npois, 2.0);
      return chi2 / (2.0 * s.c);
    }
    default: {
      double z = x;
      const double dt = delta / euler_substeps;
      const double sdt = std::sqrt(dt);
      for (int k = 0; k < euler_substeps; ++k) {
        const double mu = drift(model, z, theta);
        const double s = diffusion(model, z, theta);
        z += mu * dt + s * sdt * rng.normal();
        if (positive_state(model.family) && z < kStateFloor) z = kStateFloor;
      }
      return z;
    }
  }
}

ObservedPath simulate_path(const DiffusionModel& model, const Vector& theta, int n,
                           double delta, double x0, Rng& rng, int euler_substeps) {
  validate_params(model, theta);
  require(n >= 2, "simulate_path: n >= 2");
  require(delta > 0.0, "simulate_path: delta > 0");
  if (positive_state(model.family)) require(x0 > 0.0, "simulate_path: x0 > 0");

  ObservedPath path;
  path.delta = delta;
  path.values.resize(n + 1);
  path.values(0) = x0;

  if (model.family == Family::Vasicek) {
    const double kappa = theta(0), alpha = theta(1), sigma2 = theta(2);
    const double ec = std::exp(-kappa * delta);
    const double sd = std::sqrt(sigma2 * (1.0 - ec * ec) / (2.0 * kappa));
    for (int t = 0; t < n; ++t)
      path.values(t + 1) = alpha + (path.values(t) - alpha) * ec + sd * rng.normal();
    return path;
  }
  if (model.family == Family::CIR) {
    for (int t = 0; t < n; ++t)
      path.values(t + 1) = sample_transition(model, path.values(t), delta, theta, rng);
    return path;
  }
  const double dt = delta / euler_substeps;
  const double sdt = std::sqrt(dt);
  for (int t = 0; t < n; ++t) {
    double z = path.values(t);
    for (int k = 0; k < euler_substeps; ++k) {
      const double mu = drift(model, z, theta);
      const double s = diffusion(model, z, theta);
      z += mu * dt + s * sdt * rng.normal();
      if (z < kStateFloor) {
        z = kStateFloor;
        ++path.clamp_count;
      }
    }
    path.values(t + 1) = z;
  }
  return path;
}

double sample_stationary(const DiffusionModel& model, const Vector& theta, Rng& rng) {
  validate_params(model, theta);
  switch (model.family) {
    case Family::Vasicek: {
      require(theta(2) >= 0.0, "stationary sample: sigma2 >= 0");
      return theta(1) + std::sqrt(theta(2) / (2.0 * theta(0))) * rng.normal();
    }
    case Family::CIR: {
      const double shape = 2.0 * theta(0) * theta(1) / theta(2);
      const double scale = theta(2) / (2.0 * theta(0));
      return rng.gamma(shape, scale);
    }
    default: {
      static thread_local struct {
        bool valid = false;
        Family family;
        Vector theta;
        StationaryTable tab;
      } cache;
      if (!cache.valid || cache.family != model.family ||
          cache.theta.size() != theta.size() ||
          (cache.theta.array() != theta.array()).any()) {
        cache.tab = tabulate_stationary(model, theta);
        cache.family = model.family;
        cache.theta = theta;
        cache.valid = true;
      }
      return cache.tab.sample(rng);
    }
  }
}

namespace {

struct Ar1Fit {
  double rho, c, resid_var;  // X_{t+1} = c + rho X_t + eps
  bool ok;
};

Ar1Fit ar1_ols(const Array& v) {
  const int n = static_cast<int>(v.size()) - 1;
  const auto x = v.head(n), y = v.tail(n);
  const double mx = x.mean(), my = y.mean();
  const double sxx = ((x - mx) * (x - mx)).sum();
  const double sxy = ((x - mx) * (y - my)).sum();
  Ar1Fit f;
  if (!(sxx > 0.0)) {
    f.ok = false;
    f.rho = f.c = f.resid_var = 0.0;
    return f;
  }
  f.rho = sxy / sxx;
  f.c = my - f.rho * mx;
  f.resid_var = (y - f.c - f.rho * x).square().sum() / n;
  f.ok = true;
  return f;
}

FitResult fit_vasicek(const ObservedPath& path) {
  FitResult out;
  out.method = FitMethod::ClosedForm;
  Ar1Fit f = ar1_ols(path.values);
  if (!f.ok) {
    out.theta_hat = Vector::Zero(3);
    out.loglik = kNegInf;
    out.converged = false;
    return out;
  }
  // Map the AR(1) MLE back to (kappa, alpha, sigma2); rho clamped into (0,1).
  const double rho = std::clamp(f.rho, 1e-8, 1.0 - 1e-8);
  const double kappa = -std::log(rho) / path.delta;
  const double alpha = f.c / (1.0 - rho);
  const double sigma2 = f.resid_var * 2.0 * kappa / (1.0 - rho * rho);
  out.theta_hat = Vector(3);
  out.theta_hat << kappa, alpha, sigma2;
  out.converged = true;
  out.iterations = 0;
  if (sigma2 > 0.0)
    out.loglik = fit_loglik(DiffusionModel::vasicek(), path, out.theta_hat);
  else
    out.loglik = std::numeric_limits<double>::infinity();  // degenerate exact fit
  return out;
}

// Moment starting point shared by the mean-reverting numerical fits.
Vector mean_reverting_start(const ObservedPath& path) {
  Ar1Fit f = ar1_ols(path.values);
  const double rho = f.ok ? std::clamp(f.rho, 0.01, 0.999) : 0.9;
  const double kappa = -std::log(rho) / path.delta;
  double alpha = f.ok && std::abs(1.0 - f.rho) > 1e-10 ? f.c / (1.0 - f.rho)
                                                       : path.values.mean();
  if (!(alpha > 0.0)) alpha = std::max(path.values.mean(), 1e-4);
  Vector s(3);
  s << kappa, alpha, f.ok ? f.resid_var : 1e-4;
  return s;
}

FitResult fit_numeric(const DiffusionModel& model, const ObservedPath& path,
                      FitMethod method) {
  FitResult out;
  out.method = method;
  const int d = param_dim(model.family);

  // Positive parameters are optimized in log scale; CEV's rho stays linear.
  std::vector<bool> log_scale(d, true);
  Vector start(d);
  if (model.family == Family::CIR || model.family == Family::CEV ||
      model.family == Family::ICIR) {
    const Vector ar = mean_reverting_start(path);
    const double mean_x = path.values.mean();
    start(0) = ar(0);
    start(1) = ar(1);
    if (model.family == Family::CIR) {
      start(2) = std::max(ar(2) / (mean_x * path.delta), 1e-8);
    } else if (model.family == Family::CEV) {
      start(2) = std::sqrt(std::max(ar(2) / (mean_x * path.delta), 1e-10));
      start(3) = 0.5;
      log_scale[3] = false;
    } else {  // ICIR: sigma from the x^{3/2} diffusion scaling
      start(2) = std::sqrt(std::max(
          ar(2) / (std::pow(mean_x, 3.0) * path.delta), 1e-10));
    }
  } else {  // NLDrift: linear drift start a0 + a1 x, tiny curvature terms
    const Vector ar = mean_reverting_start(path);
    const double mean_x = path.values.mean();
    start.setZero();
    log_scale.assign(d, false);
    start(1) = ar(0) * ar(1);
    start(2) = -ar(0);
    start(4) = std::sqrt(std::max(ar(2) / (std::pow(mean_x, 3.0) * path.delta), 1e-10));
    log_scale[4] = true;
  }

  Vector z0(d);
  for (int i = 0; i < d; ++i)
    z0(i) = log_scale[i] ? std::log(std::max(start(i), 1e-12)) : start(i);

  auto unpack = [&](const Vector& z) {
    Vector th(d);
    for (int i = 0; i < d; ++i) th(i) = log_scale[i] ? std::exp(z(i)) : z(i);
    return th;
  };
  auto objective = [&](const Vector& z) {
    const Vector th = unpack(z);
    try {
      validate_params(model, th);
      const double ll = fit_loglik(model, path, th);
      return std::isfinite(ll) ? -ll : 1e300;
    } catch (const std::exception&) {
      return 1e300;
    }
  };

  NelderMeadOptions opts;
  opts.initial_step = 0.25;
  opts.max_iterations = 400;
  opts.restarts = 1;
  const NelderMeadResult r = nelder_mead(objective, z0, opts);
  out.theta_hat = unpack(r.x);
  out.loglik = -r.fmin;
  out.iterations = r.iterations;
  out.converged = r.converged && std::isfinite(out.loglik);
  return out;
}

}  // namespace

double fit_loglik(const DiffusionModel& model, const ObservedPath& path,
                  const Vector& theta) {
  double ll = 0.0;
  for (int t = 0; t < path.n(); ++t) {
    ll += log_transition_density(model, path.values(t + 1), path.values(t),
                                 path.delta, theta);
    if (!std::isfinite(ll)) return kNegInf;
  }
  return ll;
}

FitResult fit_mle(const DiffusionModel& model, const ObservedPath& path) {
  validate_path(path, positive_state(model.family));
  switch (model.family) {
    case Family::Vasicek:
      return fit_vasicek(path);
    case Family::CIR:
      return fit_numeric(model, path, FitMethod::NumericalExactLik);
    default:
      return fit_numeric(model, path, FitMethod::EulerPseudoLik);
  }
}

}  // namespace difftest
