#include "difftest/rng.hpp"

#include <cmath>

#include "difftest/numerics.hpp"
#include "difftest/types.hpp"

namespace difftest {

Rng Rng::stream(uint64_t master, std::initializer_list<uint64_t> path) {
  uint64_t s = splitmix64(master ^ 0x6a09e667f3bcc909ULL);
  for (uint64_t id : path) s = splitmix64(s ^ splitmix64(id + 0x9e3779b97f4a7c15ULL));
  return Rng(s);
}

double Rng::uniform() {
  // 53-bit mantissa, strictly inside (0,1) so log() is always safe.
  return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw DomainError("gamma: shape, scale > 0");
  if (shape < 1.0) {
    // Boost to shape+1, then multiply by U^{1/shape}.
    const double g = gamma(shape + 1.0, 1.0);
    return scale * g * std::pow(uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

long Rng::poisson(double mean) {
  if (mean < 0.0) throw DomainError("poisson: mean >= 0");
  if (mean == 0.0) return 0;
  if (mean > 1e6) throw NumericError("poisson: mean too large");
  // Split into chunks small enough for Knuth's product method.
  long total = 0;
  double remaining = mean;
  while (remaining > 30.0) {
    const double chunk = 25.0;
    total += poisson(chunk);
    remaining -= chunk;
  }
  const double limit = std::exp(-remaining);
  long k = 0;
  double p = uniform();
  while (p > limit) {
    ++k;
    p *= uniform();
  }
  return total + k;
}

void validate_path(const ObservedPath& path, bool require_positive) {
  if (path.values.size() < 3) throw DomainError("path: need at least 3 observations");
  if (!(path.delta > 0.0)) throw DomainError("path: delta must be positive");
  for (Eigen::Index i = 0; i < path.values.size(); ++i) {
    const double v = path.values(i);
    if (!std::isfinite(v)) throw DomainError("path: non-finite value");
    if (require_positive && !(v > 0.0))
      throw DomainError("path: nonpositive value for a positive-state family");
  }
}

}  // namespace difftest
