#pragma once

#include <cstdint>
#include <random>

namespace difftest {

/// Identifier of the pinned random stack, embedded in reports.
/// mt19937_64 engine; uniform via 53-bit mantissa; normal via Box-Muller;
/// gamma via Marsaglia-Tsang; Poisson via Knuth with chunked splitting.
inline constexpr const char* kRngId = "mt19937_64/boxmuller-mt-knuth";

/// Deterministic random stream. All distributions are implemented on top of
/// raw engine output so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  /// Derives an independent stream from a master seed and a path of ids
  /// (e.g. {rep}, {rep, replicate}).
  static Rng stream(uint64_t master, std::initializer_list<uint64_t> path);

  uint64_t raw() { return gen_(); }

  /// Uniform on the open interval (0,1).
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal (Box-Muller, cosine branch only).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, scale), shape > 0.
  double gamma(double shape, double scale);

  /// Poisson(mean), mean >= 0. Throws for mean > 1e6.
  long poisson(double mean);

 private:
  std::mt19937_64 gen_;
};

}  // namespace difftest
