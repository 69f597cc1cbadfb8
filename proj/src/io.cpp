#include "difftest/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "difftest/rng.hpp"

namespace difftest {

using nlohmann::json;

namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DomainError("config: bad numeric value for " + key + ": " + value);
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DomainError("config: bad integer value for " + key + ": " + value);
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_double(key, item));
  return out;
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  if (key == "family") family = value;
  else if (key.rfind("param.", 0) == 0) params[key.substr(6)] = parse_double(key, value);
  else if (key == "data") data_file = value;
  else if (key == "delta") delta = parse_double(key, value);
  else if (key == "region") {
    if (value == "auto") region_auto = true;
    else throw DomainError("config: region = auto or region.{u_min,...}");
  } else if (key == "region.u_min") { region_umin = parse_double(key, value); region_auto = false; }
  else if (key == "region.u_max") { region_umax = parse_double(key, value); region_auto = false; }
  else if (key == "region.v_min") { region_vmin = parse_double(key, value); region_auto = false; }
  else if (key == "region.v_max") { region_vmax = parse_double(key, value); region_auto = false; }
  else if (key == "bandwidth.scheme") bandwidth_scheme = value;
  else if (key == "bandwidths") { bandwidths = parse_list(key, value); bandwidth_scheme = "fixed"; }
  else if (key == "bandwidth.a") bw_a = parse_double(key, value);
  else if (key == "bandwidth.j") bw_j = static_cast<int>(parse_long(key, value));
  else if (key == "bandwidth.h1") bw_h1 = parse_double(key, value);
  else if (key == "bandwidth.hj") bw_hj = parse_double(key, value);
  else if (key == "bandwidth.anchor") bw_anchor = parse_double(key, value);
  else if (key == "bandwidth.reselect") reselect_bandwidths = parse_long(key, value) != 0;
  else if (key == "variant") variant = value;
  else if (key == "mode") stat_mode = value;
  else if (key == "grid.mu") grid_mu = static_cast<int>(parse_long(key, value));
  else if (key == "grid.mv") grid_mv = static_cast<int>(parse_long(key, value));
  else if (key == "bootstrap.b") B = static_cast<int>(parse_long(key, value));
  else if (key == "alpha") alpha = parse_double(key, value);
  else if (key == "seed") seed = static_cast<uint64_t>(parse_long(key, value));
  else if (key == "threads") threads = static_cast<int>(parse_long(key, value));
  else if (key == "n") n = static_cast<int>(parse_long(key, value));
  else if (key == "x0") x0 = parse_double(key, value);
  else if (key == "euler.substeps") euler_substeps = static_cast<int>(parse_long(key, value));
  else if (key == "out.json") out_json = value;
  else if (key == "out.csv") out_csv = value;
  else if (key == "out.text") out_text = value;
  else throw DomainError("config: unknown key: " + key);
}

void Config::validate() const {
  family_from_string(family);
  if (!(delta > 0.0)) throw DomainError("config: delta > 0 required");
  if (!(alpha > 0.0 && alpha < 0.5)) throw DomainError("config: alpha in (0,0.5)");
  if (B < 99) throw DomainError("config: bootstrap.b >= 99 required");
  if (variant != "lsel" && variant != "el")
    throw DomainError("config: variant must be lsel or el");
  if (stat_mode != "grid" && stat_mode != "data-average")
    throw DomainError("config: mode must be grid or data-average");
  if (grid_mu < 2 || grid_mv < 2) throw DomainError("config: grid >= 2x2");
}

Vector Config::theta_or_throw() const {
  const Family fam = family_from_string(family);
  const auto& names = param_names(fam);
  Vector theta(param_dim(fam));
  for (int i = 0; i < theta.size(); ++i) {
    const auto it = params.find(names[i]);
    if (it == params.end())
      throw DomainError("config: missing param." + names[i] + " for " + family);
    theta(i) = it->second;
  }
  for (const auto& [k, v] : params) {
    bool known = false;
    for (const auto& name : names) known |= (name == k);
    if (!known) throw DomainError("config: unknown parameter " + k + " for " + family);
  }
  return theta;
}

Region Config::resolve_region(const ObservedPath& path) const {
  if (region_auto) return auto_region(path);
  return Region(region_umin, region_umax, region_vmin, region_vmax);
}

BandwidthSet Config::resolve_bandwidths(const ObservedPath& path) const {
  if (bandwidth_scheme == "fixed") {
    if (bandwidths.empty()) throw DomainError("config: bandwidths list is empty");
    return BandwidthSet(bandwidths);
  }
  if (bandwidth_scheme == "endpoints") {
    if (!(bw_h1 > 0.0 && bw_hj > bw_h1))
      throw DomainError("config: endpoints scheme needs bandwidth.h1 < bandwidth.hj");
    return build_set(bw_h1, BandwidthScheme::Endpoints, bw_j, 0.0, bw_hj);
  }
  if (bandwidth_scheme == "ref-third-smallest") {
    const double anchor = bw_anchor > 0.0 ? bw_anchor : scott_rule(path);
    return build_set(anchor, BandwidthScheme::RefThirdSmallest, bw_j, bw_a);
  }
  if (bandwidth_scheme == "cv-lower-range") {
    const double anchor =
        bw_anchor > 0.0 ? bw_anchor : cv_select(path, default_cv_grid(path));
    return build_set(anchor, BandwidthScheme::CvLowerRange, bw_j, bw_a);
  }
  throw DomainError("config: unknown bandwidth.scheme " + bandwidth_scheme);
}

Variant Config::variant_enum() const {
  return variant == "el" ? Variant::EL : Variant::LSEL;
}

StatMode Config::mode_enum() const {
  return stat_mode == "grid" ? StatMode::GridIntegral : StatMode::DataAverage;
}

void load_config_file(const std::string& file, Config* config) {
  std::ifstream in(file);
  if (!in) throw DomainError("config: cannot open " + file);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DomainError("config: line " + std::to_string(line_no) + ": expected key=value");
    auto strip = [](std::string s) {
      const size_t b2 = s.find_first_not_of(" \t");
      if (b2 == std::string::npos) return std::string();
      const size_t e2 = s.find_last_not_of(" \t");
      return s.substr(b2, e2 - b2 + 1);
    };
    config->set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
}

ObservedPath ingest_series(const std::string& file, double delta) {
  std::ifstream in(file);
  if (!in) throw DomainError("data: cannot open " + file);
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const size_t e = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(b, e - b + 1);
    try {
      size_t pos = 0;
      const double v = std::stod(token, &pos);
      if (pos != token.size()) throw std::invalid_argument("trailing");
      if (!std::isfinite(v))
        throw DomainError("data: non-finite value at line " + std::to_string(line_no));
      values.push_back(v);
    } catch (const DomainError&) {
      throw;
    } catch (const std::exception&) {
      if (line_no == 1 && values.empty()) continue;  // header
      throw DomainError("data: cannot parse line " + std::to_string(line_no) +
                        ": " + token);
    }
  }
  if (values.size() < 3) throw DomainError("data: need at least 3 observations");
  ObservedPath path;
  path.delta = delta;
  path.values = Eigen::Map<const Array>(values.data(), values.size());
  validate_path(path, false);
  return path;
}

namespace {

json region_to_json(const Region& r) {
  return json{{"u_min", r.u_min}, {"u_max", r.u_max}, {"v_min", r.v_min}, {"v_max", r.v_max}};
}

Region region_from_json(const json& j) {
  return Region(j.at("u_min"), j.at("u_max"), j.at("v_min"), j.at("v_max"));
}

json per_h_to_json(const std::vector<NhResult>& per_h) {
  json arr = json::array();
  for (const auto& r : per_h) {
    arr.push_back(json{{"h", r.h},
                       {"n_h", r.value},
                       {"standardized", r.standardized},
                       {"hull_errors", r.hull_errors},
                       {"ll_fallbacks", r.ll_fallbacks},
                       {"points", r.points}});
  }
  return arr;
}

std::vector<NhResult> per_h_from_json(const json& arr) {
  std::vector<NhResult> out;
  for (const auto& j : arr) {
    NhResult r;
    r.h = j.at("h");
    r.value = j.at("n_h");
    r.standardized = j.at("standardized");
    r.hull_errors = j.at("hull_errors");
    r.ll_fallbacks = j.at("ll_fallbacks");
    r.points = j.at("points");
    out.push_back(r);
  }
  return out;
}

}  // namespace

std::string report_to_json(const TestReport& r) {
  json j;
  j["family"] = r.family;
  j["n"] = r.n;
  j["delta"] = r.delta;
  j["theta"] = std::vector<double>(r.theta.data(), r.theta.data() + r.theta.size());
  j["param_names"] = param_names(family_from_string(r.family));
  j["fitted"] = r.fitted;
  j["fit_converged"] = r.fit_converged;
  j["fit_iterations"] = r.fit_iterations;
  j["fit_method"] = r.fit_method;
  j["region"] = region_to_json(r.region);
  j["variant"] = r.variant;
  j["mode"] = r.mode;
  j["per_h"] = per_h_to_json(r.per_h);
  j["l_n"] = r.l_n;
  j["B"] = r.B;
  j["B_effective"] = r.B_effective;
  j["alpha"] = r.alpha;
  j["critical_value"] = r.critical_value;
  j["p_value"] = r.p_value;
  j["reject"] = r.reject;
  j["fit_failures"] = r.fit_failures;
  j["seed"] = r.seed;
  j["rng"] = r.rng;
  return j.dump(2) + "\n";
}

TestReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  TestReport r;
  r.family = j.at("family");
  r.n = j.at("n");
  r.delta = j.at("delta");
  const std::vector<double> th = j.at("theta");
  r.theta = Eigen::Map<const Vector>(th.data(), th.size());
  r.fitted = j.at("fitted");
  r.fit_converged = j.at("fit_converged");
  r.fit_iterations = j.at("fit_iterations");
  r.fit_method = j.at("fit_method");
  r.region = region_from_json(j.at("region"));
  r.variant = j.at("variant");
  r.mode = j.at("mode");
  r.per_h = per_h_from_json(j.at("per_h"));
  r.l_n = j.at("l_n");
  r.B = j.at("B");
  r.B_effective = j.at("B_effective");
  r.alpha = j.at("alpha");
  r.critical_value = j.at("critical_value");
  r.p_value = j.at("p_value");
  r.reject = j.at("reject");
  r.fit_failures = j.at("fit_failures");
  r.seed = j.at("seed");
  r.rng = j.at("rng");
  return r;
}

std::string report_to_text(const TestReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os << "Transitional-density specification test (" << r.variant << ", " << r.mode
     << ")\n";
  os << "model                " << r.family << (r.fitted ? " (fitted" : " (given")
     << (r.fit_converged ? ")" : ", NOT converged)") << "\n";
  const auto& names = param_names(family_from_string(r.family));
  os << "theta               ";
  os.precision(6);
  for (int i = 0; i < r.theta.size(); ++i)
    os << " " << names[i] << "=" << r.theta(i);
  os << "\n";
  os << "n / delta            " << r.n << " / ";
  os.precision(6);
  os << r.delta << "\n";
  os << "region (rotated)     [" << r.region.u_min << ", " << r.region.u_max
     << "] x [" << r.region.v_min << ", " << r.region.v_max << "]\n";
  os << "bandwidths          ";
  os.precision(6);
  for (const auto& ph : r.per_h) os << " " << ph.h;
  os << "\n";
  os << "N(h)                ";
  os.precision(4);
  for (const auto& ph : r.per_h) os << " " << ph.value;
  os << "\n";
  os.precision(4);
  os << "Test statistic L_n   " << r.l_n << "\n";
  os << "Critical value l*_" << r.alpha << "  " << r.critical_value << " (B="
     << r.B_effective << ")\n";
  os << "p-value              " << r.p_value << "\n";
  os << "decision             " << (r.reject ? "reject" : "do not reject") << "\n";
  long hull = 0;
  for (const auto& ph : r.per_h) hull += ph.hull_errors;
  os << "diagnostics          hull_errors=" << hull
     << " fit_failures=" << r.fit_failures << " seed=" << r.seed << " rng=" << r.rng
     << "\n";
  return os.str();
}

std::string fit_to_json(const std::string& family, const FitResult& fit) {
  json j;
  j["family"] = family;
  j["theta"] = std::vector<double>(fit.theta_hat.data(),
                                   fit.theta_hat.data() + fit.theta_hat.size());
  j["param_names"] = param_names(family_from_string(family));
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  switch (fit.method) {
    case FitMethod::ClosedForm: j["method"] = "closed-form"; break;
    case FitMethod::NumericalExactLik: j["method"] = "numerical-exact-likelihood"; break;
    case FitMethod::EulerPseudoLik: j["method"] = "euler-pseudo-likelihood"; break;
  }
  return j.dump(2) + "\n";
}

std::string study_to_json(const StudyDesign& d, const StudyResult& r) {
  json j;
  j["design"] = {
      {"truth", family_name(d.truth.family)},
      {"theta_truth", std::vector<double>(d.theta_truth.data(),
                                          d.theta_truth.data() + d.theta_truth.size())},
      {"null_family", family_name(d.null_family)},
      {"n", d.n},
      {"delta", d.delta},
      {"region", region_to_json(d.region)},
      {"data_driven", d.data_driven},
      {"bandwidths", d.data_driven ? std::vector<double>{} : d.fixed_set.values},
      {"B", d.B},
      {"alpha", d.alpha},
      {"n_reps", d.n_reps},
      {"seed", d.master_seed},
      {"variant", d.variant == Variant::LSEL ? "lsel" : "el"},
      {"mode", d.mode == StatMode::GridIntegral ? "grid" : "data-average"},
      {"rng", kRngId},
  };
  j["rejection_rate"] = r.rejection_rate;
  j["binomial_se"] = r.binomial_se;
  j["per_bandwidth_rates"] = r.per_bandwidth_rates;
  j["asymptotic_rate"] = r.asymptotic_rate;
  j["asymptotic_per_h"] = r.asymptotic_per_h;
  j["completed"] = r.completed;
  j["failures"] = r.failures;
  return j.dump(2) + "\n";
}

std::string study_to_text(const StudyDesign& d, const StudyResult& r) {
  std::ostringstream os;
  os << "Monte Carlo study: truth " << family_name(d.truth.family) << ", null "
     << family_name(d.null_family) << ", n=" << d.n << ", B=" << d.B
     << ", reps=" << r.completed << " (failures " << r.failures << ")\n";
  os.setf(std::ios::fixed);
  os.precision(4);
  if (!d.data_driven) {
    os << "bandwidths ";
    for (double h : d.fixed_set.values) os << " " << h;
    os << "\n";
  }
  os << "single-h   ";
  for (double rate : r.per_bandwidth_rates) os << " " << rate;
  os << "\n";
  if (!r.asymptotic_per_h.empty() && r.asymptotic_rate > 0.0) {
    os << "asymptotic ";
    for (double rate : r.asymptotic_per_h) os << " (" << rate << ")";
    os << "\n";
  }
  os << "rejection rate " << r.rejection_rate << " (se " << r.binomial_se << ")\n";
  os.precision(1);
  os << "wall time " << r.wall_seconds << " s\n";
  return os.str();
}

std::string study_to_csv(const StudyResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "rep,seed,l_n,critical_value,p_value,reject,theta_hat\n";
  for (const auto& rep : r.reps) {
    if (!rep.ok) {
      os << rep.rep << "," << rep.seed << ",,,,failed,\n";
      continue;
    }
    os << rep.rep << "," << rep.seed << "," << rep.l_n << "," << rep.critical_value
       << "," << rep.p_value << "," << (rep.reject ? 1 : 0) << ",";
    for (int i = 0; i < rep.theta_hat.size(); ++i)
      os << (i ? ";" : "") << rep.theta_hat(i);
    os << "\n";
  }
  return os.str();
}

std::string replicates_to_csv(const BootstrapResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "b,l_n_star\n";
  for (size_t b = 0; b < r.replicates.size(); ++b)
    os << b + 1 << "," << r.replicates[b] << "\n";
  return os.str();
}

std::string per_h_to_csv(const std::vector<NhResult>& per_h) {
  std::ostringstream os;
  os.precision(17);
  os << "h,n_h,standardized,hull_errors\n";
  for (const auto& r : per_h)
    os << r.h << "," << r.value << "," << r.standardized << "," << r.hull_errors << "\n";
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path);
  out << content;
}

}  // namespace difftest
