#pragma once

// Experiment front end: flat key=value configs, CSV/JSON artifact emission,
// the per-mode drivers behind the CLI, the figure-data generator, and the
// parameter sweep with bounded worker concurrency.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "collapse/linearized.hpp"
#include "collapse/matched.hpp"
#include "collapse/modulation.hpp"
#include "collapse/profiles.hpp"
#include "collapse/quadrature.hpp"
#include "collapse/wavesolver.hpp"

namespace collapse::harness {

using json = nlohmann::json;

// ---- config ----------------------------------------------------------------

// flat "key = value" text; '#' starts a comment
struct Config {
  std::map<std::string, std::string> kv;

  static Config parse(std::istream& in) {
    Config c;
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (!key.empty()) c.kv[key] = val;
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config: " + path);
    return parse(in);
  }

  bool has(const std::string& k) const { return kv.count(k) > 0; }
  double get_num(const std::string& k, double dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stod(it->second);
  }
  int get_int(const std::string& k, int dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stoi(it->second);
  }
  std::string get_str(const std::string& k, const std::string& dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
  }
  std::vector<double> get_list(const std::string& k,
                               std::vector<double> dflt) const {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
  }
  json echo() const {
    json j = json::object();
    for (const auto& [k, v] : kv) j[k] = v;
    return j;
  }
};

// ---- deterministic text artifacts -------------------------------------------

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& header)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << header << "\n";
  }
  void row(const std::vector<double>& vals) {
    for (size_t i = 0; i < vals.size(); ++i)
      out_ << (i ? "," : "") << fmt17(vals[i]);
    out_ << "\n";
  }
  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// ---- wave config from flat keys ---------------------------------------------

inline wave::SimConfig sim_config_from(const Config& c) {
  wave::SimConfig s;
  s.lambda0 = c.get_num("lambda0", s.lambda0);
  s.lambda_dot0 = c.get_num("lambda_dot0", s.lambda_dot0);
  s.domain_radius = c.get_num("domain_radius", s.domain_radius);
  s.base_h = c.get_num("base_h", s.base_h);
  s.cfl = c.get_num("cfl", s.cfl);
  s.points_per_lambda = c.get_int("points_per_lambda", s.points_per_lambda);
  s.lambda_min = c.get_num("lambda_min", s.lambda_min);
  s.t_max = c.get_num("t_max", s.t_max);
  s.max_levels = c.get_int("max_levels", s.max_levels);
  s.steps_per_sample = c.get_int("steps_per_sample", s.steps_per_sample);
  s.y_cut = c.get_num("y_cut", s.y_cut);
  s.perturb_amp = c.get_num("perturb_amp", s.perturb_amp);
  s.perturb_r0 = c.get_num("perturb_r0", s.perturb_r0);
  s.perturb_width = c.get_num("perturb_width", s.perturb_width);
  s.strict_domain_check = c.get_int("strict_domain_check", 1) != 0;
  const std::string ex = c.get_str("extractor", "both");
  if (ex == "curvature") {
    s.use_orthogonality = false;
  } else if (ex == "orthogonality") {
    s.use_curvature = false;
  } else if (ex != "both") {
    throw std::invalid_argument("config: extractor must be both, curvature, "
                                "or orthogonality");
  }
  return s;
}

inline json sim_result_json(const wave::SimResult& r) {
  json j;
  j["collapsed"] = r.collapsed;
  j["stop_reason"] = r.stop_reason;
  j["t_star_estimate"] = r.t_star_estimate;
  j["t_star_bracket"] = {r.t_star_bracket.first, r.t_star_bracket.second};
  j["law_slope"] = r.law_slope;
  j["law_kappa"] = r.law_kappa;
  j["law_extended_rms"] = r.law_extended_rms;
  j["law_linear_rms"] = r.law_linear_rms;
  j["energy_initial"] = r.energy_initial;
  j["energy_drift_rel"] = r.energy_drift_rel;
  j["extractor_max_reldiff"] = r.extractor_max_reldiff;
  j["max_abs_field"] = r.max_abs_field;
  j["n_samples"] = r.samples.size();
  json evs = json::array();
  for (const auto& e : r.refinements) {
    evs.push_back({{"t", e.t},
                   {"lambda", e.lambda},
                   {"level", e.level},
                   {"h_new", e.h_new},
                   {"energy_rel_change", e.energy_rel_change}});
  }
  j["refinements"] = evs;
  return j;
}

// ---- figure data -------------------------------------------------------------

struct ComparePoint {
  double neg_log_tstar_minus_t;
  double lambda_over_tstar_minus_t;
  double analytic;
  double relative_deviation;
};

struct CompareReport {
  std::vector<ComparePoint> points;
  int dropped_past_tstar = 0;
  int dropped_outside_validity = 0;  // samples with t*-t >= 1
  double max_deviation = 0.0;
  double median_deviation = 0.0;
  // restricted to the resolved window: -ln(t*-t) >= 1 and t*-t at least ten
  // times the collapse-time uncertainty
  double median_deviation_resolved = 0.0;
  double max_deviation_resolved = 0.0;
  std::pair<double, double> resolved_neg_log_range{0.0, 0.0};
  int n_resolved = 0;
};

// (t, lambda) series + collapse time -> figure columns; the analytic column
// is sqrt(2/3) (-ln(t*-t))^{-1/2} with no fitted inputs
inline CompareReport emit_figure_data(const std::vector<std::pair<double, double>>& series,
                                      double t_star,
                                      double t_star_uncertainty = 0.0) {
  CompareReport rep;
  std::vector<double> devs, devs_res;
  for (const auto& [t, lam] : series) {
    const double dt = t_star - t;
    if (!(dt > 0.0)) {
      ++rep.dropped_past_tstar;
      continue;
    }
    if (!(dt < 1.0)) {  // asymptotic column undefined for t*-t >= 1
      ++rep.dropped_outside_validity;
      continue;
    }
    ComparePoint p;
    p.neg_log_tstar_minus_t = -std::log(dt);
    p.lambda_over_tstar_minus_t = lam / dt;
    p.analytic = std::sqrt(2.0 / 3.0) / std::sqrt(p.neg_log_tstar_minus_t);
    p.relative_deviation =
        std::abs(p.lambda_over_tstar_minus_t - p.analytic) / p.analytic;
    rep.points.push_back(p);
    devs.push_back(p.relative_deviation);
    if (p.neg_log_tstar_minus_t >= 1.0 && dt >= 10.0 * t_star_uncertainty) {
      devs_res.push_back(p.relative_deviation);
      if (rep.n_resolved == 0)
        rep.resolved_neg_log_range.first = p.neg_log_tstar_minus_t;
      rep.resolved_neg_log_range.second = p.neg_log_tstar_minus_t;
      ++rep.n_resolved;
    }
  }
  if (!devs.empty()) {
    rep.max_deviation = *std::max_element(devs.begin(), devs.end());
    std::sort(devs.begin(), devs.end());
    rep.median_deviation = devs[devs.size() / 2];
  }
  if (!devs_res.empty()) {
    rep.max_deviation_resolved = *std::max_element(devs_res.begin(), devs_res.end());
    std::sort(devs_res.begin(), devs_res.end());
    rep.median_deviation_resolved = devs_res[devs_res.size() / 2];
  }
  return rep;
}

// ---- modes -------------------------------------------------------------------

struct ModeResult {
  int exit_code = 0;
  json summary;
};

inline ModeResult mode_integrals(const Config& cfg,
                                 const std::filesystem::path& out) {
  const double tol = cfg.get_num("tol", 1e-12);
  auto rows = quad::identity_suite(tol);
  std::filesystem::create_directories(out);
  std::ofstream csv(out / "integrals.csv");
  if (!csv) throw std::runtime_error("cannot write integrals.csv");
  csv << "name,exact,numeric,residual\n";
  json tab = json::array();
  double worst = 0.0;
  std::printf("%-28s %14s %22s %12s\n", "identity", "exact", "numeric",
              "residual");
  for (const auto& r : rows) {
    std::printf("%-28s %14s %22.17g %12.3e\n", r.name.c_str(), r.exact.str().c_str(),
                r.numeric, r.residual);
    csv << '"' << r.name << "\"," << r.exact.str() << ',' << fmt17(r.numeric)
        << ',' << fmt17(r.residual) << "\n";
    tab.push_back({{"name", r.name},
                   {"exact", r.exact.str()},
                   {"numeric", r.numeric},
                   {"residual", r.residual}});
    worst = std::max(worst, r.residual);
  }
  // gauge shifts of the gamma numerator
  json gauge = json::array();
  double worst_gauge = 0.0;
  for (double alpha : {1.0, -1.0, 17.3, -17.3}) {
    const double d = quad::gauge_invariance_check(alpha, tol);
    gauge.push_back({{"alpha", alpha}, {"shift", d}});
    worst_gauge = std::max(worst_gauge, std::abs(d));
    std::printf("gauge shift alpha=%-8.3g %42.3e\n", alpha, d);
  }
  ModeResult res;
  res.summary["identities"] = tab;
  res.summary["gauge_shifts"] = gauge;
  res.summary["max_residual"] = worst;
  res.summary["max_gauge_shift"] = worst_gauge;
  res.exit_code = (worst <= 1e-10 && worst_gauge <= 1e-9) ? 0 : 1;
  return res;
}

// gamma for a pipeline run: the quadrature value unless the config pins one
inline std::pair<double, const char*> pipeline_gamma(const Config& cfg) {
  if (cfg.has("gamma")) return {cfg.get_num("gamma", 0.75), "config"};
  return {quad::compute_gamma(1e-12), "quadrature"};
}

inline ModeResult mode_modulation(const Config& cfg,
                                  const std::filesystem::path& out) {
  const double l0 = cfg.get_num("lambda0", 1.0);
  const double ld0 = cfg.get_num("lambda_dot0", -1.0);
  const double dt = cfg.get_num("dt", 1e-3);
  const double t_end = cfg.get_num("t_end", 1e3);
  const auto [gamma, gamma_source] = pipeline_gamma(cfg);
  mod::IntegrateOptions opt;
  opt.gamma = gamma;
  opt.extended_coeff = cfg.get_num("extended_coeff", 0.0);
  opt.lambda_min = cfg.get_num("lambda_min", 1e-6);
  auto traj = mod::integrate_modulation(l0, ld0, dt, t_end, opt);

  std::filesystem::create_directories(out);
  CsvWriter csv(out / "modulation.csv",
                "t,lambda,lambda_dot,first_integral,asymptotic_ratio");
  const bool have_c = ld0 != 0.0;
  std::optional<double> t_star;
  if (ld0 < 0.0) t_star = mod::collapse_time(l0, ld0).t_star;
  for (const auto& s : traj.samples) {
    double fi = 0.0, ratio = 0.0;
    if (have_c && traj.c * s.lambda < 1.0) fi = mod::first_integral(s, traj.c);
    if (t_star && *t_star - s.t > 0.0 && *t_star - s.t < 1.0)
      ratio = s.lambda / mod::asymptotic_lambda(s.t, *t_star);
    csv.row({s.t, s.lambda, s.lambda_dot, fi, ratio});
  }
  ModeResult res;
  res.summary["gamma"] = gamma;
  res.summary["gamma_source"] = gamma_source;
  res.summary["c"] = traj.c;
  res.summary["collapsed"] = traj.collapsed();
  if (t_star) res.summary["t_star_quadrature"] = *t_star;
  if (traj.t_star_estimate) res.summary["t_star_estimate"] = *traj.t_star_estimate;
  if (traj.t_star_bracket)
    res.summary["t_star_bracket"] = {traj.t_star_bracket->first,
                                     traj.t_star_bracket->second};
  if (ld0 > 0.0) {
    auto fit = mod::case_a_asymptotics(traj);
    res.summary["case_a"] = {{"conclusive", fit.conclusive},
                             {"exponent", fit.exponent},
                             {"amplitude", fit.amplitude},
                             {"t_star", fit.t_star},
                             {"note", fit.note}};
  }
  if (t_star && traj.t_star_estimate) {
    const double rel =
        std::abs(*traj.t_star_estimate - *t_star) / *t_star;
    res.summary["t_star_relative_mismatch"] = rel;
    res.exit_code = rel <= 1e-4 ? 0 : 1;
  }
  return res;
}

inline ModeResult mode_phi1(const Config& cfg, const std::filesystem::path& out) {
  const double ld = cfg.get_num("lambda_dot", 0.3);
  const double zmax = cfg.get_num("zmax", 40.0);
  const double tol = cfg.get_num("tol", 1e-8);
  const auto [gamma, gamma_source] = pipeline_gamma(cfg);
  auto sol = matched::solve_phi1(ld, zmax, tol, 1e-6, gamma);
  auto fit = matched::fit_outer(sol);
  auto resid = matched::ode_residual(sol);

  std::filesystem::create_directories(out);
  CsvWriter csv(out / "phi1.csv", "z,phi1,ode_residual");
  double worst = 0.0;
  for (size_t i = 0; i < sol.z.size(); ++i) {
    csv.row({sol.z[i], sol.phi[i], resid[i]});
    worst = std::max(worst, std::abs(resid[i]));
  }
  ModeResult res;
  res.summary["lambda_dot"] = ld;
  res.summary["zmax"] = zmax;
  res.summary["gamma"] = gamma;
  res.summary["gamma_source"] = gamma_source;
  res.summary["c"] = fit.c;
  res.summary["c_bar"] = fit.c_bar;
  res.summary["c_prime"] = matched::matching_constant(ld);
  res.summary["fit_residual"] = fit.fit_residual;
  res.summary["max_ode_residual"] = worst;
  res.exit_code = worst <= 10.0 * tol ? 0 : 1;
  std::printf("%s\n", res.summary.dump(2).c_str());
  return res;
}

inline ModeResult mode_perturbation(const Config& cfg,
                                    const std::filesystem::path& out) {
  const auto [gamma, gamma_source] = pipeline_gamma(cfg);
  std::filesystem::create_directories(out);
  ModeResult res;
  res.summary["gamma"] = gamma;
  res.summary["gamma_source"] = gamma_source;

  // operator residual convergence, h vs h/2
  const double ymax = cfg.get_num("ymax", 100.0);
  const double h = cfg.get_num("h", 0.05);
  json table = json::array();
  struct Case {
    const char* name;
    std::function<double(double)> u, rhs;
    double ylo;
  };
  std::vector<Case> cases = {
      {"zero mode", [](double y) { return profiles::zeta(y); },
       [](double) { return 0.0; }, 0.0},
      {"homogeneous regular", [](double y) { return profiles::eta1(y); },
       [](double) { return 0.0; }, 0.0},
      {"homogeneous growing", [](double y) { return profiles::eta2(y); },
       [](double) { return 0.0; }, 0.5},
      {"first correction", [](double y) { return profiles::xi10(y); },
       [](double y) { return profiles::B1_chi(y); }, 0.0},
      {"second correction", [](double y) { return profiles::w2(y); },
       [](double y) { return 2.0 * profiles::kGamma * profiles::xi10(y); }, 0.0}};
  double worst_ratio_err = 0.0;
  for (const auto& c : cases) {
    const auto op1 = lin::build_L(lin::cell_centered_grid(h, ymax));
    const auto op2 = lin::build_L(lin::cell_centered_grid(h / 2.0, ymax));
    const double r1 = lin::residual_inf(op1, c.u, c.rhs, c.ylo, ymax - 2.0);
    const double r2 = lin::residual_inf(op2, c.u, c.rhs, c.ylo, ymax - 2.0);
    const double ratio = r1 / r2;
    table.push_back({{"case", c.name},
                     {"residual_h", r1},
                     {"residual_h2", r2},
                     {"ratio", ratio}});
    worst_ratio_err = std::max(worst_ratio_err, std::abs(ratio - 4.0));
    std::printf("%-22s  |res|_h=%10.3e  |res|_h/2=%10.3e  ratio=%6.3f\n",
                c.name, r1, r2, ratio);
  }
  res.summary["operator_convergence"] = table;

  // solvability of the second-order right-hand side
  const double s_at_gamma = lin::solvability_integral(gamma);
  const double s_at_06 = lin::solvability_integral(0.6);
  const double slope = (s_at_06 - s_at_gamma) / (0.6 - gamma);
  res.summary["solvability_at_gamma"] = s_at_gamma;
  res.summary["solvability_slope"] = slope;
  std::printf("solvability at gamma=%g: %.3e (affine slope %.6f)\n", gamma,
              s_at_gamma, slope);

  const bool pass = std::abs(s_at_gamma) <= 1e-8 &&
                    std::abs(slope + 8.0 / 3.0) <= 0.01 * (8.0 / 3.0) &&
                    worst_ratio_err <= 0.8;
  res.exit_code = pass ? 0 : 1;
  return res;
}

inline ModeResult mode_simulate(const Config& cfg,
                                const std::filesystem::path& out) {
  wave::SimConfig sc = sim_config_from(cfg);
  auto r = wave::run_simulation(sc);
  std::filesystem::create_directories(out);
  CsvWriter csv(out / "lambda_series.csv",
                "t,lambda_curvature,lambda_orthogonality,energy");
  for (const auto& s : r.samples)
    csv.row({s.t, s.lambda_curvature, s.lambda_orthogonality, s.energy});
  ModeResult res;
  res.summary = sim_result_json(r);
  const bool extractors_ok =
      !(sc.use_curvature && sc.use_orthogonality) ||
      r.extractor_max_reldiff <= 0.03;
  const bool field_ok = r.max_abs_field <= 1.2;
  res.summary["extractors_ok"] = extractors_ok;
  res.summary["field_bounded"] = field_ok;
  res.exit_code = (extractors_ok && field_ok) ? 0 : 1;
  return res;
}

inline ModeResult mode_compare(const Config& cfg,
                               const std::filesystem::path& out) {
  const std::string source = cfg.get_str("source", "pde");
  std::vector<std::pair<double, double>> series;
  double t_star = 0.0;
  double t_star_unc = 0.0;
  json sim_summary;
  if (source == "modulation") {
    const double l0 = cfg.get_num("lambda0", 1.0);
    const double ld0 = cfg.get_num("lambda_dot0", -1.0);
    mod::IntegrateOptions opt;
    opt.lambda_min = cfg.get_num("lambda_min", 1e-8);
    auto traj = mod::integrate_modulation(l0, ld0, cfg.get_num("dt", 1e-3),
                                          cfg.get_num("t_end", 1e3), opt);
    for (const auto& s : traj.samples) series.emplace_back(s.t, s.lambda);
    t_star = mod::collapse_time(l0, ld0).t_star;
  } else {
    wave::SimConfig sc = sim_config_from(cfg);
    auto r = wave::run_simulation(sc);
    sim_summary = sim_result_json(r);
    for (const auto& s : r.samples) {
      const double lam = s.lambda_curvature > 0.0 ? s.lambda_curvature
                                                  : s.lambda_orthogonality;
      if (lam > 0.0) series.emplace_back(s.t, lam);
    }
    t_star = r.t_star_estimate;
    t_star_unc = r.t_star_bracket.second - r.t_star_bracket.first;
    if (!(t_star > 0.0))
      throw std::runtime_error("compare: simulation produced no collapse-time estimate");
  }
  auto rep = emit_figure_data(series, t_star, t_star_unc);
  std::filesystem::create_directories(out);
  CsvWriter csv(out / "compare.csv",
                "neg_log_tstar_minus_t,lambda_over_tstar_minus_t,analytic,"
                "relative_deviation");
  for (const auto& p : rep.points)
    csv.row({p.neg_log_tstar_minus_t, p.lambda_over_tstar_minus_t, p.analytic,
             p.relative_deviation});
  ModeResult res;
  res.summary["source"] = source;
  res.summary["t_star"] = t_star;
  res.summary["n_points"] = rep.points.size();
  res.summary["dropped_past_tstar"] = rep.dropped_past_tstar;
  res.summary["dropped_outside_validity"] = rep.dropped_outside_validity;
  res.summary["max_deviation"] = rep.max_deviation;
  res.summary["median_deviation"] = rep.median_deviation;
  res.summary["median_deviation_resolved"] = rep.median_deviation_resolved;
  res.summary["max_deviation_resolved"] = rep.max_deviation_resolved;
  res.summary["n_resolved"] = rep.n_resolved;
  res.summary["resolved_neg_log_range"] = {rep.resolved_neg_log_range.first,
                                           rep.resolved_neg_log_range.second};
  if (!sim_summary.is_null()) res.summary["simulation"] = sim_summary;
  if (!rep.points.empty()) {
    res.summary["reachable_neg_log_range"] = {
        rep.points.front().neg_log_tstar_minus_t,
        rep.points.back().neg_log_tstar_minus_t};
  }
  const double threshold = cfg.get_num("deviation_threshold", 0.15);
  res.exit_code = (rep.n_resolved > 0 ? rep.median_deviation_resolved
                                      : rep.median_deviation) <= threshold
                      ? 0
                      : 1;
  return res;
}

// ---- sweep -------------------------------------------------------------------

struct SweepRun {
  double lambda0, lambda_dot0, perturb_amp;
  std::uint64_t seed;
  bool collapsed = false, case_a = false, failed = false;
  double law_slope = 0.0;
  std::string note;
};

inline ModeResult mode_sweep(const Config& cfg, const std::filesystem::path& out,
                             int workers, std::uint64_t seed) {
  auto l0s = cfg.get_list("lambda0_values", {0.5, 1.0, 2.0});
  auto ld0s = cfg.get_list("lambda_dot0_values", {-0.25, -0.5, -1.0});
  auto amps = cfg.get_list("perturb_amps", {0.0});
  const double lambda_min_frac = cfg.get_num("lambda_min_frac", 1e-2);

  std::vector<SweepRun> runs;
  std::uint64_t idx = 0;
  for (double amp : amps)
    for (double l0 : l0s)
      for (double ld0 : ld0s) {
        SweepRun r;
        r.lambda0 = l0;
        r.lambda_dot0 = ld0;
        r.perturb_amp = amp;
        r.seed = seed + idx++;
        runs.push_back(r);
      }

  std::filesystem::create_directories(out);
  std::atomic<size_t> next{0};
  std::mutex io_mutex;
  auto work = [&]() {
    for (;;) {
      const size_t k = next.fetch_add(1);
      if (k >= runs.size()) return;
      SweepRun& r = runs[k];
      if (r.lambda_dot0 >= 0.0) {
        r.case_a = true;  // expanding branch, excluded from collapse statistics
        continue;
      }
      try {
        wave::SimConfig sc = sim_config_from(cfg);
        sc.lambda0 = r.lambda0;
        sc.lambda_dot0 = r.lambda_dot0;
        sc.domain_radius = std::max(20.0 * r.lambda0, cfg.get_num("domain_radius", 24.0));
        sc.base_h = r.lambda0 / cfg.get_num("cells_per_lambda0", 32.0);
        sc.lambda_min = lambda_min_frac * r.lambda0;
        if (r.perturb_amp != 0.0) {
          std::mt19937_64 rng(r.seed);
          std::uniform_real_distribution<double> mag(0.5, 1.0);
          sc.perturb_amp = r.perturb_amp * mag(rng);
        }
        auto sim = wave::run_simulation(sc);
        r.collapsed = sim.collapsed;
        r.law_slope = sim.law_slope;
        if (!sim.collapsed) r.note = sim.stop_reason;
        std::filesystem::path rd =
            out / ("run_" + std::to_string(k));
        std::filesystem::create_directories(rd);
        CsvWriter csv(rd / "lambda_series.csv",
                      "t,lambda_curvature,lambda_orthogonality,energy");
        for (const auto& s : sim.samples)
          csv.row({s.t, s.lambda_curvature, s.lambda_orthogonality, s.energy});
        json j = sim_result_json(sim);
        j["lambda0"] = r.lambda0;
        j["lambda_dot0"] = r.lambda_dot0;
        j["perturb_amp_effective"] = sc.perturb_amp;
        j["seed"] = r.seed;
        write_json(rd / "summary.json", j);
      } catch (const std::exception& e) {
        r.failed = true;
        r.note = e.what();
        std::lock_guard<std::mutex> lock(io_mutex);
        std::fprintf(stderr, "sweep run %zu failed: %s\n", k, e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  const int W = std::max(1, workers);
  for (int i = 0; i < W; ++i) pool.emplace_back(work);
  for (auto& th : pool) th.join();

  int n_caseb = 0, n_collapsed = 0, n_slope_ok = 0;
  json rows = json::array();
  for (const auto& r : runs) {
    const double slope_rel_err = std::abs(r.law_slope + 1.5) / 1.5;
    if (!r.case_a) {
      ++n_caseb;
      if (r.collapsed) ++n_collapsed;
      if (r.collapsed && slope_rel_err <= 0.10) ++n_slope_ok;
    }
    rows.push_back({{"lambda0", r.lambda0},
                    {"lambda_dot0", r.lambda_dot0},
                    {"perturb_amp", r.perturb_amp},
                    {"seed", r.seed},
                    {"case_a", r.case_a},
                    {"collapsed", r.collapsed},
                    {"law_slope", r.law_slope},
                    {"failed", r.failed},
                    {"note", r.note}});
  }
  ModeResult res;
  res.summary["runs"] = rows;
  res.summary["case_b_total"] = n_caseb;
  res.summary["collapsed"] = n_collapsed;
  res.summary["slope_within_10pct"] = n_slope_ok;
  res.exit_code = (n_caseb > 0 && n_collapsed == n_caseb && n_slope_ok == n_caseb)
                      ? 0
                      : 1;
  return res;
}

// ---- dispatch ----------------------------------------------------------------

inline ModeResult run_plan(const std::string& mode, const Config& cfg,
                           const std::filesystem::path& out, int workers = 1,
                           std::uint64_t seed = 12345) {
  ModeResult res;
  if (mode == "integrals")
    res = mode_integrals(cfg, out);
  else if (mode == "modulation")
    res = mode_modulation(cfg, out);
  else if (mode == "phi1")
    res = mode_phi1(cfg, out);
  else if (mode == "perturbation")
    res = mode_perturbation(cfg, out);
  else if (mode == "simulate")
    res = mode_simulate(cfg, out);
  else if (mode == "compare")
    res = mode_compare(cfg, out);
  else if (mode == "sweep")
    res = mode_sweep(cfg, out, workers, seed);
  else
    throw std::invalid_argument("unknown mode: " + mode);

  res.summary["mode"] = mode;
  res.summary["seed"] = seed;
  res.summary["config"] = cfg.echo();
  write_json(out / "summary.json", res.summary);
  return res;
}

}  // namespace collapse::harness
