#include <doctest.h>

#include <cmath>

#include "difftest/bandwidth.hpp"
#include "difftest/kernel.hpp"
#include "difftest/models.hpp"
#include "difftest/numerics.hpp"
#include "difftest/rng.hpp"
#include "helpers.hpp"

using namespace difftest;

namespace {

ObservedPath make_path(const Array& v, double delta = 1.0 / 12.0) {
  ObservedPath p;
  p.values = v;
  p.delta = delta;
  return p;
}

}  // namespace

TEST_CASE("bandwidth set invariants") {
  CHECK_THROWS_AS(BandwidthSet(std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(BandwidthSet({0.01, 0.01}), DomainError);
  CHECK_THROWS_AS(BandwidthSet({-0.01, 0.02}), DomainError);
  const BandwidthSet s({0.01, 0.02, 0.04});
  CHECK(s.ratio() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.is_geometric(1e-12));
  const BandwidthSet t({0.01, 0.02, 0.03});
  CHECK_FALSE(t.is_geometric(1e-3));
}

TEST_CASE("scott rule") {
  // Unit-variance sample of 65 observations: 64^{-1/6} = 0.5.
  Rng rng(8);
  Array v(65);
  for (int i = 0; i < 65; ++i) v(i) = rng.normal();
  const double m = v.mean();
  const double sd = std::sqrt((v - m).square().sum() / v.size());
  v = (v - m) / sd;  // exact unit scale
  const ObservedPath p = make_path(v);
  CHECK(scott_rule(p) == doctest::Approx(0.5).epsilon(1e-12));

  // Scale equivariance.
  ObservedPath q = make_path(7.5 * v);
  CHECK(scott_rule(q) == doctest::Approx(7.5 * scott_rule(p)).epsilon(1e-12));

  ObservedPath flat = make_path(Array::Constant(30, 0.5));
  CHECK_THROWS_AS(scott_rule(flat), DomainError);

  // n^{-1/6} sits inside the admissible rate window (n^{-1/4}, n^{-1/7}).
  for (double n : {50.0, 1000.0, 100000.0}) {
    const double r = std::pow(n, -1.0 / 6.0);
    CHECK(r > std::pow(n, -1.0 / 4.0));
    CHECK(r < std::pow(n, -1.0 / 7.0));
  }
}

TEST_CASE("build_set schemes") {
  // Endpoints: a = (h1/hJ)^{1/(J-1)}.
  const BandwidthSet e = build_set(0.007, BandwidthScheme::Endpoints, 7, 0.0, 0.020);
  CHECK(e.size() == 7);
  CHECK(e.values.front() == doctest::Approx(0.007).epsilon(1e-14));
  CHECK(e.values.back() == doctest::Approx(0.020).epsilon(1e-12));
  CHECK(e.ratio() == doctest::Approx(std::pow(0.35, 1.0 / 6.0)).epsilon(1e-12));
  CHECK(e.ratio() == doctest::Approx(0.83946).epsilon(1e-4));
  CHECK(e.is_geometric(1e-12));

  // Reference bandwidth third smallest.
  const BandwidthSet r = build_set(0.01, BandwidthScheme::RefThirdSmallest, 6, 0.95);
  const std::vector<double> expect = {0.009025,    0.0095,      0.01,
                                      0.010526316, 0.011080332, 0.011663507};
  REQUIRE(r.size() == 6);
  for (int k = 0; k < 6; ++k)
    CHECK(r.values[k] == doctest::Approx(expect[k]).epsilon(1e-6));
  CHECK(r.is_geometric(1e-12));

  // CV anchor in the lower range (position 2).
  const BandwidthSet c = build_set(0.01, BandwidthScheme::CvLowerRange, 6, 0.9);
  CHECK(c.values[1] == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(c.is_geometric(1e-12));

  // J = 1 collapses to the anchor.
  const BandwidthSet one = build_set(0.013, BandwidthScheme::RefThirdSmallest, 1, 0.9);
  CHECK(one.values == std::vector<double>{0.013});

  CHECK_THROWS_AS(build_set(0.01, BandwidthScheme::Endpoints, 7, 0.0, 0.005),
                  DomainError);
  CHECK_THROWS_AS(build_set(0.01, BandwidthScheme::RefThirdSmallest, 2, 0.95),
                  DomainError);
  CHECK_THROWS_AS(build_set(0.01, BandwidthScheme::RefThirdSmallest, 6, 1.1),
                  DomainError);
}

TEST_CASE("cv criterion basics") {
  auto model = DiffusionModel::vasicek();
  Vector theta(3);
  theta << 0.85837, 0.089102, 0.0021854;
  Rng rng(23);
  const ObservedPath path =
      simulate_path(model, theta, 250, 1.0 / 12.0, theta(1), rng);

  // Tiny bandwidth empties every leave-out window.
  CHECK(std::isinf(cv_criterion(path, 1e-9)));

  // Scale equivariance of the selected bandwidth.
  const std::vector<double> grid = {0.005, 0.01, 0.02, 0.04};
  const double h1 = cv_select(path, grid);
  ObservedPath scaled = path;
  scaled.values *= 3.0;
  std::vector<double> grid3 = grid;
  for (auto& h : grid3) h *= 3.0;
  CHECK(cv_select(scaled, grid3) == doctest::Approx(3.0 * h1).epsilon(1e-12));

  CHECK_THROWS_AS(cv_select(path, {}), DomainError);
}

TEST_CASE("cv tracks the ise-optimal bandwidth for iid gaussian pairs") {
  // Independent pairs: conditional density does not depend on x, and the
  // true conditional law is known, so a grid search of the exact integrated
  // squared error is available as the oracle.
  Rng rng(9001);
  const int n = 500;
  ObservedPath path;
  path.delta = 1.0;
  path.values.resize(n + 1);
  for (int i = 0; i <= n; ++i) path.values(i) = rng.normal();

  std::vector<double> grid;
  for (double h = 0.1; h <= 1.3; h *= 1.3) grid.push_back(h);
  const double h_cv = cv_select(path, grid);

  auto ise = [&](double h) {
    // ISE of the conditional estimate against N(0,1), averaged over the
    // stationary x-law by sampling observed x values.
    double acc = 0.0;
    int used = 0;
    for (int t = 0; t < n; t += 25) {
      const double x = path.values(t);
      for (int i = 0; i < 80; ++i) {
        const double y = -4.0 + 8.0 * (i + 0.5) / 80;
        const double diff =
            transition_kde(path, h, x, y) - normal_pdf(y, 0.0, 1.0);
        acc += diff * diff * 8.0 / 80;
      }
      ++used;
    }
    return acc / used;
  };
  double best_h = grid[0], best = 1e300;
  for (double h : grid) {
    const double v = ise(h);
    if (v < best) {
      best = v;
      best_h = h;
    }
  }
  CHECK(h_cv >= 0.5 * best_h);
  CHECK(h_cv <= 2.0 * best_h);
}

TEST_CASE("cv on the monthly vasicek design stays in the reported range") {
  // Mean CV bandwidth across replicates brackets the paper-scale values
  // (0.017 at n = 250) within a factor of two.
  auto model = DiffusionModel::vasicek();
  Vector theta(3);
  theta << 0.85837, 0.089102, 0.0021854;
  std::vector<double> grid;
  for (double h = 0.004; h <= 0.09; h *= 1.35) grid.push_back(h);
  double mean_h = 0.0;
  const int reps = 12;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = Rng::stream(7400 + rep, {3});
    const ObservedPath path = simulate_path(
        model, theta, 250, 1.0 / 12.0, sample_stationary(model, theta, rng), rng);
    mean_h += cv_select(path, grid);
  }
  mean_h /= reps;
  CHECK(mean_h >= 0.0085);
  CHECK(mean_h <= 0.034);
}
