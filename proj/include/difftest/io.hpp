#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "difftest/bootstrap.hpp"
#include "difftest/study.hpp"

namespace difftest {

/// Flat configuration shared by the CLI commands. Every entry can come from a
/// key=value config file or a command-line flag; flags win.
struct Config {
  std::string family = "vasicek";
  std::map<std::string, double> params;  // named parameters; empty = fit

  std::string data_file;
  double delta = 1.0 / 12.0;

  bool region_auto = true;
  double region_umin = 0.0, region_umax = 0.0;
  double region_vmin = 0.0, region_vmax = 0.0;

  // fixed | endpoints | ref-third-smallest | cv-lower-range
  std::string bandwidth_scheme = "ref-third-smallest";
  std::vector<double> bandwidths;  // scheme = fixed
  double bw_a = 0.95;
  int bw_j = 6;
  double bw_h1 = 0.0, bw_hj = 0.0;  // scheme = endpoints
  double bw_anchor = 0.0;           // 0 = derive (Scott or CV) from data

  std::string variant = "lsel";          // lsel | el
  std::string stat_mode = "data-average";  // grid | data-average
  int grid_mu = 40, grid_mv = 40;

  int B = 250;
  double alpha = 0.05;
  uint64_t seed = 1;
  int threads = 0;
  bool reselect_bandwidths = false;  // per-replicate reselection in bootstrap

  // simulate command
  int n = 125;
  std::optional<double> x0;
  int euler_substeps = 20;

  std::string out_json, out_csv, out_text;

  /// Sets one key; throws DomainError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  Vector theta_or_throw() const;  // params in family order
  Region resolve_region(const ObservedPath& path) const;
  BandwidthSet resolve_bandwidths(const ObservedPath& path) const;
  Variant variant_enum() const;
  StatMode mode_enum() const;
};

/// key=value lines, '#' comments, blank lines ignored.
void load_config_file(const std::string& file, Config* config);

/// One numeric observation per line; a single leading non-numeric line is
/// treated as a header. Parse failures name the line.
ObservedPath ingest_series(const std::string& file, double delta);

struct TestReport {
  std::string family;
  int n = 0;
  double delta = 0.0;
  Vector theta;
  bool fitted = false;
  bool fit_converged = true;
  int fit_iterations = 0;
  std::string fit_method;
  Region region;
  std::string variant, mode;
  std::vector<NhResult> per_h;
  double l_n = 0.0;
  int B = 0, B_effective = 0;
  double alpha = 0.05;
  double critical_value = 0.0;
  double p_value = 1.0;
  bool reject = false;
  int fit_failures = 0;
  uint64_t seed = 0;
  std::string rng;
};

std::string report_to_json(const TestReport& report);      // deterministic
TestReport report_from_json(const std::string& text);
std::string report_to_text(const TestReport& report);      // Table-5 style row

std::string fit_to_json(const std::string& family, const FitResult& fit);
std::string study_to_json(const StudyDesign& design, const StudyResult& result);
std::string study_to_text(const StudyDesign& design, const StudyResult& result);
std::string study_to_csv(const StudyResult& result);
std::string replicates_to_csv(const BootstrapResult& result);
std::string per_h_to_csv(const std::vector<NhResult>& per_h);

void write_file(const std::string& path, const std::string& content);

}  // namespace difftest
