#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "difftest/io.hpp"
#include "difftest/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace difftest;

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_file, "key=value configuration file");
  cmd->add_option("--set", flags->sets, "override a config key (key=value)")
      ->take_all();
}

void apply_common(const CommonFlags& flags, Config* config) {
  if (!flags.config_file.empty()) load_config_file(flags.config_file, config);
  for (const auto& kv : flags.sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw DomainError("--set expects key=value, got: " + kv);
    config->set(kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void apply_params(const std::vector<std::string>& params, Config* config) {
  for (const auto& kv : params) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw DomainError("--param expects name=value, got: " + kv);
    config->set("param." + kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int cmd_simulate(const Config& cfg, const std::string& out) {
  const DiffusionModel model(family_from_string(cfg.family));
  const Vector theta = cfg.theta_or_throw();
  Rng rng = Rng::stream(cfg.seed, {0x51Du});
  const double x0 = cfg.x0 ? *cfg.x0 : sample_stationary(model, theta, rng);
  const ObservedPath path =
      simulate_path(model, theta, cfg.n, cfg.delta, x0, rng, cfg.euler_substeps);
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < path.values.size(); ++i) os << path.values(i) << "\n";
  if (out.empty()) std::cout << os.str();
  else write_file(out, os.str());
  std::cerr << "simulated " << path.values.size() << " observations (clamped "
            << path.clamp_count << ")\n";
  return 0;
}

int cmd_fit(const Config& cfg) {
  const DiffusionModel model(family_from_string(cfg.family));
  const ObservedPath path = ingest_series(cfg.data_file, cfg.delta);
  validate_path(path, positive_state(model.family));
  const FitResult fit = fit_mle(model, path);
  const std::string j = fit_to_json(cfg.family, fit);
  std::cout << j;
  if (!cfg.out_json.empty()) write_file(cfg.out_json, j);
  return fit.converged ? 0 : 3;
}

int cmd_bandwidth(const Config& cfg, bool with_cv) {
  const ObservedPath path = ingest_series(cfg.data_file, cfg.delta);
  std::ostringstream os;
  os.precision(10);
  const double scott = scott_rule(path);
  os << "scott " << scott << "\n";
  if (with_cv) os << "cv " << cv_select(path, default_cv_grid(path)) << "\n";
  const BandwidthSet hs = cfg.resolve_bandwidths(path);
  os << "set";
  for (double h : hs.values) os << " " << h;
  os << "\n";
  std::cout << os.str();
  if (!cfg.out_text.empty()) write_file(cfg.out_text, os.str());
  return 0;
}

int cmd_test(const Config& cfg, const std::string& out_perh) {
  const DiffusionModel model(family_from_string(cfg.family));
  const ObservedPath path = ingest_series(cfg.data_file, cfg.delta);
  validate_path(path, positive_state(model.family));
  set_threads(cfg.threads);

  TestReport report;
  report.family = cfg.family;
  report.n = path.n();
  report.delta = cfg.delta;
  report.seed = cfg.seed;
  report.rng = kRngId;
  report.variant = cfg.variant;
  report.mode = cfg.stat_mode;
  report.alpha = cfg.alpha;
  report.B = cfg.B;

  Vector theta;
  if (cfg.params.empty()) {
    const FitResult fit = fit_mle(model, path);
    theta = fit.theta_hat;
    report.fitted = true;
    report.fit_converged = fit.converged;
    report.fit_iterations = fit.iterations;
    switch (fit.method) {
      case FitMethod::ClosedForm: report.fit_method = "closed-form"; break;
      case FitMethod::NumericalExactLik:
        report.fit_method = "numerical-exact-likelihood";
        break;
      case FitMethod::EulerPseudoLik:
        report.fit_method = "euler-pseudo-likelihood";
        break;
    }
    if (!fit.converged)
      std::cerr << "warning: parameter fit did not converge; test results use "
                   "the best iterate\n";
  } else {
    theta = cfg.theta_or_throw();
    report.fitted = false;
    report.fit_method = "given";
  }
  report.theta = theta;

  const Region region = cfg.resolve_region(path);
  report.region = region;

  BootstrapConfig bcfg;
  bcfg.bandwidths = cfg.resolve_bandwidths(path);
  bcfg.reselect = cfg.reselect_bandwidths;
  bcfg.reselect_a = cfg.bw_a;
  bcfg.reselect_j = cfg.bw_j;
  bcfg.region = region;
  bcfg.grid = GridSpec{cfg.grid_mu, cfg.grid_mv};
  bcfg.variant = cfg.variant_enum();
  bcfg.mode = cfg.mode_enum();
  bcfg.B = cfg.B;
  bcfg.alpha = cfg.alpha;
  bcfg.seed = cfg.seed;
  bcfg.euler_substeps = cfg.euler_substeps;

  const BootstrapResult boot = bootstrap_test(path, model, theta, bcfg);
  report.per_h = boot.observed_per_h;
  report.l_n = boot.observed_l_n;
  report.B_effective = boot.B_effective;
  report.critical_value = boot.critical_value;
  report.p_value = boot.p_value;
  report.reject = boot.reject;
  report.fit_failures = boot.fit_failures;

  std::cout << report_to_text(report);
  if (!cfg.out_json.empty()) write_file(cfg.out_json, report_to_json(report));
  if (!cfg.out_csv.empty()) write_file(cfg.out_csv, replicates_to_csv(boot));
  if (!out_perh.empty()) write_file(out_perh, per_h_to_csv(boot.observed_per_h));
  return 0;
}

int cmd_study(const Config& cfg, const std::string& preset, int variant_id,
              bool full_scale, bool with_asymptotic, int reps_override,
              int b_override) {
  StudyDesign design = presets::by_name(preset, variant_id, cfg.n, full_scale);
  design.master_seed = cfg.seed;
  design.alpha = cfg.alpha;
  design.threads = cfg.threads;
  design.with_asymptotic = with_asymptotic;
  design.variant = cfg.variant_enum();
  if (b_override > 0) design.B = b_override;
  if (reps_override > 0) design.n_reps = reps_override;
  design.grid = GridSpec{cfg.grid_mu, cfg.grid_mv};

  const StudyResult result = run_size_study(design);
  std::cout << study_to_text(design, result);
  if (!cfg.out_json.empty()) write_file(cfg.out_json, study_to_json(design, result));
  if (!cfg.out_csv.empty()) write_file(cfg.out_csv, study_to_csv(result));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "difftest: transitional-density specification tests for diffusion models"};
  app.require_subcommand(1);

  CommonFlags flags;
  Config cfg;
  std::vector<std::string> params;
  std::string out, out_perh, preset = "vasicek-table1", method = "scott";
  int variant_id = 0, reps_override = 0, b_override = 0;
  bool full_scale = false, with_asymptotic = false;

  auto* sim = app.add_subcommand("simulate", "simulate a model path");
  add_common(sim, &flags);
  sim->add_option("--family", cfg.family);
  sim->add_option("--param", params, "model parameter name=value")->take_all();
  sim->add_option("--n", cfg.n);
  sim->add_option("--delta", cfg.delta);
  sim->add_option("--seed", cfg.seed);
  double x0_flag = std::nan("");
  sim->add_option("--x0", x0_flag, "initial value (default: stationary draw)");
  sim->add_option("--out", out, "output series file");

  auto* fit = app.add_subcommand("fit", "maximum-likelihood fit");
  add_common(fit, &flags);
  fit->add_option("--family", cfg.family);
  fit->add_option("--data", cfg.data_file)->required();
  fit->add_option("--delta", cfg.delta);
  fit->add_option("--out-json", cfg.out_json);

  auto* bw = app.add_subcommand("bandwidth", "bandwidth selection");
  add_common(bw, &flags);
  bw->add_option("--data", cfg.data_file)->required();
  bw->add_option("--delta", cfg.delta);
  bw->add_option("--method", method, "scott | cv");

  auto* test = app.add_subcommand("test", "specification test on a data series");
  add_common(test, &flags);
  test->add_option("--family", cfg.family);
  test->add_option("--param", params, "null parameters (default: fit)")->take_all();
  test->add_option("--data", cfg.data_file)->required();
  test->add_option("--delta", cfg.delta);
  test->add_option("--bootstrap-b", cfg.B);
  test->add_option("--alpha", cfg.alpha);
  test->add_option("--seed", cfg.seed);
  test->add_option("--variant", cfg.variant, "lsel | el");
  test->add_option("--mode", cfg.stat_mode, "grid | data-average");
  test->add_option("--threads", cfg.threads);
  test->add_option("--out-json", cfg.out_json);
  test->add_option("--out-replicates", cfg.out_csv);
  test->add_option("--out-per-h", out_perh);

  auto* study = app.add_subcommand("study", "Monte Carlo size/power study");
  add_common(study, &flags);
  study->add_option("--preset", preset, "vasicek-table1 | cir-table3 | power-table4a");
  study->add_option("--model", variant_id, "-2|0|2 (Vasicek) or 0|1|2 (CIR)");
  study->add_option("--n", cfg.n);
  study->add_option("--bootstrap-b", b_override);
  study->add_option("--reps", reps_override);
  study->add_option("--alpha", cfg.alpha);
  study->add_option("--seed", cfg.seed);
  study->add_option("--threads", cfg.threads);
  study->add_flag("--full-scale", full_scale, "B=250, 500 repetitions");
  study->add_flag("--asymptotic", with_asymptotic, "also run the asymptotic tests");
  study->add_option("--variant", cfg.variant, "lsel | el");
  study->add_option("--out-json", cfg.out_json);
  study->add_option("--out-csv", cfg.out_csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    apply_common(flags, &cfg);
    apply_params(params, &cfg);
    if (!std::isnan(x0_flag)) cfg.x0 = x0_flag;
    cfg.validate();
    if (sim->parsed()) return cmd_simulate(cfg, out);
    if (fit->parsed()) return cmd_fit(cfg);
    if (bw->parsed()) return cmd_bandwidth(cfg, method == "cv");
    if (test->parsed()) return cmd_test(cfg, out_perh);
    if (study->parsed())
      return cmd_study(cfg, preset, variant_id, full_scale, with_asymptotic,
                       reps_override, b_override);
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
