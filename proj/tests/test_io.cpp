#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "difftest/io.hpp"
#include "difftest/rng.hpp"

using namespace difftest;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& content) {
    static int counter = 0;
    path = "difftest_io_test_" + std::to_string(counter++) + ".tmp";
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("config keys") {
  Config c;
  c.set("family", "cir");
  c.set("param.kappa", "0.9");
  c.set("param.alpha", "0.09");
  c.set("param.sigma2", "0.03");
  c.set("delta", "0.0833");
  c.set("bootstrap.b", "120");
  c.set("alpha", "0.1");
  c.set("bandwidths", "0.01,0.02,0.03");
  c.set("region.u_min", "0.01");
  c.set("region.u_max", "0.3");
  c.set("region.v_min", "-0.02");
  c.set("region.v_max", "0.02");
  c.validate();
  CHECK(c.family == "cir");
  CHECK(c.B == 120);
  CHECK(c.bandwidth_scheme == "fixed");
  CHECK_FALSE(c.region_auto);

  const Vector theta = c.theta_or_throw();
  CHECK(theta(0) == 0.9);
  CHECK(theta(2) == 0.03);

  CHECK_THROWS_AS(c.set("no.such.key", "1"), DomainError);
  CHECK_THROWS_AS(c.set("delta", "fast"), DomainError);

  Config missing;
  missing.family = "vasicek";
  missing.params["kappa"] = 1.0;
  CHECK_THROWS_AS(missing.theta_or_throw(), DomainError);
  Config unknown_param;
  unknown_param.family = "vasicek";
  unknown_param.params["kappa"] = 1.0;
  unknown_param.params["alpha"] = 0.1;
  unknown_param.params["sigma2"] = 0.01;
  unknown_param.params["rho"] = 0.5;
  CHECK_THROWS_AS(unknown_param.theta_or_throw(), DomainError);

  Config bad;
  bad.variant = "gel";
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("config file parsing") {
  TempFile f(
      "# test configuration\n"
      "family = vasicek\n"
      "param.kappa = 0.85837\n"
      "param.alpha = 0.089102   # long-run mean\n"
      "param.sigma2 = 0.0021854\n"
      "seed = 97\n"
      "\n"
      "mode = grid\n");
  Config c;
  load_config_file(f.path, &c);
  CHECK(c.family == "vasicek");
  CHECK(c.seed == 97);
  CHECK(c.stat_mode == "grid");
  CHECK(c.params.at("alpha") == 0.089102);

  TempFile bad("family vasicek\n");
  Config c2;
  CHECK_THROWS_AS(load_config_file(bad.path, &c2), DomainError);
  Config c3;
  CHECK_THROWS_AS(load_config_file("does_not_exist.cfg", &c3), DomainError);
}

TEST_CASE("series ingestion") {
  TempFile plain("0.05\n0.051\n0.049\n");
  const ObservedPath p = ingest_series(plain.path, 1.0 / 12.0);
  CHECK(p.values.size() == 3);
  CHECK(p.n() == 2);
  CHECK(p.values(1) == 0.051);
  CHECK(p.delta == doctest::Approx(1.0 / 12.0));

  TempFile with_header("rate\n0.05\n0.051\n0.049\n0.052\n");
  CHECK(ingest_series(with_header.path, 1.0 / 12.0).values.size() == 4);

  TempFile broken("0.05\n0.051\n0.049\n0.050\n0.048\n0.047\nx.yz\n0.05\n");
  try {
    ingest_series(broken.path, 1.0 / 12.0);
    CHECK(false);
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("line 7") != std::string::npos);
  }

  TempFile tiny("0.05\n0.051\n");
  CHECK_THROWS_AS(ingest_series(tiny.path, 1.0 / 12.0), DomainError);
}

TEST_CASE("test report json round trip") {
  TestReport r;
  r.family = "vasicek";
  r.n = 432;
  r.delta = 1.0 / 12.0;
  r.theta = Vector(3);
  r.theta << 0.2610637490243, 0.0717324117, 0.00041250091;
  r.fitted = true;
  r.fit_converged = true;
  r.fit_iterations = 0;
  r.fit_method = "closed-form";
  r.region = Region(0.005, 0.4, -0.03, 0.03);
  r.variant = "lsel";
  r.mode = "data-average";
  NhResult nh;
  nh.h = 0.007;
  nh.value = 1.29438567201;
  nh.standardized = 29.7351;
  nh.hull_errors = 2;
  nh.points = 405;
  r.per_h = {nh};
  r.l_n = 29.7351002;
  r.B = 500;
  r.B_effective = 500;
  r.alpha = 0.05;
  r.critical_value = 2.54;
  r.p_value = 1.0 / 501.0;
  r.reject = true;
  r.seed = 11;
  r.rng = kRngId;

  const std::string j1 = report_to_json(r);
  const TestReport back = report_from_json(j1);
  const std::string j2 = report_to_json(back);
  CHECK(j1 == j2);
  CHECK(back.theta(0) == r.theta(0));
  CHECK(back.per_h[0].value == nh.value);
  CHECK(back.p_value == r.p_value);

  const std::string text = report_to_text(r);
  CHECK(text.find("L_n") != std::string::npos);
  CHECK(text.find("p-value") != std::string::npos);
  CHECK(text.find("reject") != std::string::npos);
  CHECK(text.find("29.73") != std::string::npos);
}

TEST_CASE("csv writers") {
  BootstrapResult b;
  b.replicates = {0.5, 1.25, 3.75};
  const std::string csv = replicates_to_csv(b);
  CHECK(csv.find("b,l_n_star") == 0);
  CHECK(csv.find("2,1.25") != std::string::npos);

  NhResult nh;
  nh.h = 0.01;
  nh.value = 1.5;
  nh.standardized = (1.5 - 1.0) / (std::sqrt(2.0) * 0.01);
  nh.hull_errors = 1;
  const std::string pcsv = per_h_to_csv({nh});
  CHECK(pcsv.find("h,n_h,standardized,hull_errors") == 0);
  CHECK(pcsv.find("0.01,1.5,") != std::string::npos);
}
