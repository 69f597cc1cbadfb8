#include <doctest.h>

#include <cmath>

#include "difftest/numerics.hpp"
#include "difftest/rng.hpp"
#include "helpers.hpp"

using namespace difftest;

TEST_CASE("adaptive integration") {
  CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0, 1e-12) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(integrate([](double x) { return std::exp(-x * x); }, -10.0, 10.0, 1e-12) ==
        doctest::Approx(std::sqrt(M_PI)).epsilon(1e-10));
}

TEST_CASE("gauss-legendre exact for low-degree polynomials") {
  auto poly = [](double x) {
    return 3.0 + x - 2.0 * std::pow(x, 4) + 0.5 * std::pow(x, 9);
  };
  const double exact = oracles::romberg(poly, -0.3, 1.7);
  CHECK(gauss_legendre(poly, -0.3, 1.7, 5) == doctest::Approx(exact).epsilon(1e-13));
  CHECK(gauss_legendre(poly, -0.3, 1.7, 10) == doctest::Approx(exact).epsilon(1e-13));
}

TEST_CASE("log bessel I against half-integer closed forms") {
  auto log_i_half = [](double z) {
    return std::log(std::sqrt(2.0 / (M_PI * z)) * std::sinh(z));
  };
  auto log_i_3half = [](double z) {
    return std::log(std::sqrt(2.0 / (M_PI * z)) * (std::cosh(z) - std::sinh(z) / z));
  };
  for (double z : {0.3, 2.0, 20.0, 80.0, 150.0, 400.0}) {
    CHECK(log_bessel_i(0.5, z) == doctest::Approx(log_i_half(z)).epsilon(1e-9));
    CHECK(log_bessel_i(1.5, z) == doctest::Approx(log_i_3half(z)).epsilon(1e-9));
  }
  // Both branches near the series/Hankel switch, against high-precision
  // reference values.
  struct Ref { double nu, z, log_i; };
  const Ref refs[] = {
      {0.0, 99.999999, 96.7797316949552132},   // series side
      {0.0, 100.000001, 96.7797336849299542},  // Hankel side
      {3.93, 99.999999, 96.7021270611181710},
      {3.93, 100.000001, 96.7021290526524829},
      {4.7, 99.999999, 96.6687443080477092},
      {4.7, 100.000001, 96.6687463002526380},
  };
  for (const auto& r : refs)
    CHECK(log_bessel_i(r.nu, r.z) == doctest::Approx(r.log_i).epsilon(1e-11));
  CHECK(log_bessel_i(0.0, 0.0) == 0.0);
  CHECK(std::isinf(log_bessel_i(2.5, 0.0)));
}

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(normal_quantile(0.05) == doctest::Approx(-1.6448536269514722).epsilon(1e-12));
  for (double p : {1e-8, 0.2, 0.77, 1.0 - 1e-9}) {
    const double x = normal_quantile(p);
    CHECK(0.5 * std::erfc(-x / std::sqrt(2.0)) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("nelder-mead") {
  auto quad = [](const Vector& v) {
    return (v(0) - 2.0) * (v(0) - 2.0) + 3.0 * (v(1) + 1.0) * (v(1) + 1.0);
  };
  Vector x0(2);
  x0 << 0.0, 0.0;
  const auto r = nelder_mead(quad, x0);
  CHECK(r.converged);
  CHECK(r.x(0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(r.x(1) == doctest::Approx(-1.0).epsilon(1e-5));

  auto rosenbrock = [](const Vector& v) {
    const double a = 1.0 - v(0), b = v(1) - v(0) * v(0);
    return a * a + 100.0 * b * b;
  };
  const auto r2 = nelder_mead(rosenbrock, x0, {.max_iterations = 5000, .restarts = 2});
  CHECK(r2.x(0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(r2.x(1) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("rng streams are deterministic and distinct") {
  Rng a = Rng::stream(42, {1, 2});
  Rng b = Rng::stream(42, {1, 2});
  Rng c = Rng::stream(42, {1, 3});
  bool all_equal = true, any_equal_c = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.raw(), vb = b.raw(), vc = c.raw();
    all_equal &= (va == vb);
    any_equal_c |= (va == vc);
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_c);
}

TEST_CASE("rng distribution moments") {
  Rng rng(7);
  const int n = 200000;
  std::vector<double> u(n), z(n), g(n), p(n);
  for (int i = 0; i < n; ++i) {
    u[i] = rng.uniform();
    z[i] = rng.normal();
    g[i] = rng.gamma(3.0, 2.0);
    p[i] = static_cast<double>(rng.poisson(i % 2 == 0 ? 4.0 : 60.0));
  }
  CHECK(oracles::mean(u) == doctest::Approx(0.5).epsilon(0.005));
  CHECK(*std::min_element(u.begin(), u.end()) > 0.0);
  CHECK(*std::max_element(u.begin(), u.end()) < 1.0);
  CHECK(oracles::mean(z) == doctest::Approx(0.0).epsilon(0.01));
  CHECK(oracles::variance(z) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(oracles::mean(g) == doctest::Approx(6.0).epsilon(0.02));
  CHECK(oracles::variance(g) == doctest::Approx(12.0).epsilon(0.05));
  // Poisson alternates means 4 and 60.
  double m4 = 0.0, m60 = 0.0;
  for (int i = 0; i < n; ++i) (i % 2 == 0 ? m4 : m60) += p[i];
  CHECK(m4 / (n / 2) == doctest::Approx(4.0).epsilon(0.01));
  CHECK(m60 / (n / 2) == doctest::Approx(60.0).epsilon(0.01));
}
