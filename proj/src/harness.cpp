#include "stargraph/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stargraph/graph.hpp"
#include "stargraph/graph_bvp.hpp"
#include "stargraph/graph_process.hpp"
#include "stargraph/model.hpp"
#include "stargraph/parallel.hpp"
#include "stargraph/quad.hpp"
#include "stargraph/rng.hpp"
#include "stargraph/sde.hpp"
#include "stargraph/version.hpp"

namespace stargraph {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("loglog_slope: need at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw ConfigError("loglog_slope: data must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ------------------------------------------------------------------- parsing

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    cfg.raw[key] = value;

    try {
      if (key == "experiment") cfg.experiment = value;
      else if (key == "model") cfg.model = value;
      else if (key == "forcing") cfg.forcing = value;
      else if (key == "scheme") cfg.scheme = value;
      else if (key == "eps_ladder") cfg.eps_ladder = parse_list(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "n_paths") cfg.n_paths = std::stoi(value);
      else if (key == "horizon") cfg.horizon = std::stod(value);
      else if (key == "t_max") cfg.t_max = std::stod(value);
      else if (key == "dt_factor") cfg.dt_factor = std::stod(value);
      else if (key == "n_cells") cfg.n_cells = std::stoi(value);
      else if (key == "table_cells") cfg.table_cells = std::stoi(value);
      else if (key == "bins") cfg.bins = std::stoi(value);
      else if (key == "workers") cfg.workers = std::stoi(value);
      else if (key == "record_timing") cfg.record_timing = (value == "true" || value == "1");
      else if (key == "out_dir") cfg.out_dir = value;
      else if (key == "x0") {
        const auto xs = parse_list(value);
        if (xs.size() != 2) throw ConfigError("x0 needs two components");
        cfg.x0 = {xs[0], xs[1]};
      } else if (key == "x_O") {
        const auto xs = parse_list(value);
        if (xs.size() != 2) throw ConfigError("x_O needs two components");
        cfg.has_x_o = true;
        cfg.x_o = {xs[0], xs[1]};
      } else if (key == "quad_tol") {
        cfg.quad_tol = std::stod(value);
      } else if (key == "validate_samples") {
        cfg.validate_samples = std::stoi(value);
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> known = {"coefficients", "occupation", "exit-times",
                                                 "marginals",    "bvp",        "compare"};
  if (std::find(known.begin(), known.end(), experiment) == known.end())
    throw ConfigError("unknown experiment: '" + experiment + "'");
  const bool needs_ladder = experiment == "occupation" || experiment == "exit-times" ||
                            experiment == "marginals" || experiment == "compare";
  if (needs_ladder) {
    if (eps_ladder.empty()) throw ConfigError("eps_ladder must not be empty");
    for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
      if (!(eps_ladder[i] > 0.0)) throw ConfigError("eps_ladder entries must be > 0");
      if (i > 0 && !(eps_ladder[i] < eps_ladder[i - 1]))
        throw ConfigError("eps_ladder must be strictly decreasing");
    }
  }
  if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (!(dt_factor > 0.0) || dt_factor > 0.05) throw ConfigError("dt_factor must be in (0, 0.05]");
  if (n_cells < 2 || table_cells < 8) throw ConfigError("cell counts too small");
  if (bins < 1) throw ConfigError("bins must be >= 1");
  if (!(quad_tol > 0.0)) throw ConfigError("quad_tol must be > 0");
  if (validate_samples < 100) throw ConfigError("validate_samples must be >= 100");
  scheme_from_name(scheme);  // throws on unknown scheme
}

// ----------------------------------------------------------------- artifacts

namespace {

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header,
            std::uint64_t seed) {
    out_.open(path);
    if (!out_) throw ConfigError("cannot write " + path.string());
    cols_ = header;
    cols_.push_back("rng_algorithm");
    cols_.push_back("seed");
    seed_ = seed;
    for (std::size_t i = 0; i < cols_.size(); ++i) {
      out_ << cols_[i] << (i + 1 < cols_.size() ? "," : "\r\n");
    }
  }

  void row(const std::vector<std::string>& values) {
    for (const auto& v : values) out_ << v << ",";
    out_ << kRngName << "," << seed_ << "\r\n";
  }

 private:
  std::ofstream out_;
  std::vector<std::string> cols_;
  std::uint64_t seed_ = 0;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

struct Assertion {
  std::string name;
  bool pass;
  std::string detail;
};

class ExperimentRun {
 public:
  ExperimentRun(const ExperimentConfig& cfg, const std::string& out_override, int workers_override)
      : cfg_(cfg) {
    if (!out_override.empty()) cfg_.out_dir = out_override;
    if (workers_override > 0) cfg_.workers = workers_override;
    if (cfg_.workers <= 0) cfg_.workers = default_workers();
    dir_ = cfg_.out_dir;
    fs::create_directories(dir_);
    start_ = std::chrono::steady_clock::now();
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  const fs::path& dir() const { return dir_; }

  void check(const std::string& name, bool pass, const std::string& detail) {
    assertions_.push_back({name, pass, detail});
  }

  void add_summary(const std::string& key, const ordered_json& value) { summary_[key] = value; }

  void set_probe_set(const std::vector<Vec2>& probes) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : probes) arr.push_back({p.x, p.y});
    probe_set_ = arr;
  }

  int finish() {
    ordered_json manifest;
    manifest["schema_version"] = 1;
    manifest["project_version"] = kProjectVersion;
    manifest["experiment"] = cfg_.experiment;
    manifest["rng"] = kRngName;
    manifest["seed"] = cfg_.seed;
    manifest["workers"] = cfg_.workers;
    ordered_json echo;
    for (const auto& [k, v] : cfg_.raw) echo[k] = v;
    manifest["config"] = echo;
    if (!probe_set_.is_null()) manifest["probe_set"] = probe_set_;
    if (cfg_.record_timing) {
      const auto elapsed = std::chrono::duration<double>(
          std::chrono::steady_clock::now() - start_).count();
      manifest["wall_clock_seconds"] = elapsed;
    }
    write_text(dir_ / "manifest.json", manifest.dump(2) + "\n");

    bool all_pass = true;
    ordered_json checks = ordered_json::array();
    std::ostringstream human;
    human << "experiment: " << cfg_.experiment << "\n";
    for (const auto& a : assertions_) {
      all_pass = all_pass && a.pass;
      checks.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
      human << (a.pass ? "[PASS] " : "[FAIL] ") << a.name << ": " << a.detail << "\n";
    }
    ordered_json summary;
    summary["experiment"] = cfg_.experiment;
    summary["pass"] = all_pass;
    summary["checks"] = checks;
    for (auto& [k, v] : summary_.items()) summary[k] = v;
    write_text(dir_ / "summary.json", summary.dump(2) + "\n");
    human << (all_pass ? "RESULT: pass\n" : "RESULT: fail\n");
    write_text(dir_ / "summary.txt", human.str());
    return all_pass ? 0 : 1;
  }

 private:
  ExperimentConfig cfg_;
  fs::path dir_;
  std::vector<Assertion> assertions_;
  ordered_json summary_;
  ordered_json probe_set_;
  std::chrono::steady_clock::time_point start_;
};

SimConfig sim_config_for(const ExperimentConfig& cfg, double eps) {
  SimConfig sc;
  sc.eps = eps;
  sc.dt = cfg.dt_factor * eps;
  sc.horizon = cfg.horizon;
  sc.n_paths = cfg.n_paths;
  sc.seed = cfg.seed;
  sc.workers = cfg.workers;
  sc.scheme = scheme_from_name(cfg.scheme);
  return sc;
}

std::vector<Vec2> compare_probe_set() {
  return {{0.25, 0.0}, {0.5, 0.0}, {0.75, 0.0}, {0.95, 0.0}, {1.1, 0.0},
          {1.25, 0.0}, {1.4, 0.0}, {1.65, 0.0}, {1.9, 0.0}};
}

// ---------------------------------------------------------------- experiments

void run_coefficients(ExperimentRun& run, const Model& model) {
  const auto& cfg = run.cfg();

  const ValidationReport report = validate(model, cfg.validate_samples);
  run.check("model_valid", report.pass,
            report.pass ? "structural checks pass at " + std::to_string(report.sample_count) +
                              " sample points"
                        : report.failure_note.empty() ? "structural check failed"
                                                      : report.failure_note);
  ordered_json vchecks = ordered_json::array();
  for (const auto& chk : report.checks) {
    vchecks.push_back({{"name", chk.name}, {"max_violation", chk.max_violation},
                       {"threshold", chk.threshold}, {"pass", chk.pass}});
  }
  run.add_summary("validation", vchecks);

  CoefficientGridSpec spec;
  spec.cells_per_edge = cfg.table_cells;
  spec.convergence_tol = cfg.quad_tol;
  const EdgeCoefficients coeffs = compute_coefficients(model, spec);

  write_text(run.dir() / "coefficients.json", coeffs.to_json() + "\n");
  CsvWriter csv(run.dir() / "coefficients.csv", {"k", "h", "M", "abar", "fbar"}, cfg.seed);
  for (const auto& e : coeffs.edges) {
    for (std::size_t j = 0; j < e.h.size(); ++j) {
      csv.row({std::to_string(e.k), format_double(e.h[j]), format_double(e.M[j]),
               format_double(e.abar[j]), format_double(e.fbar[j])});
    }
  }

  bool positive = true;
  for (const auto& e : coeffs.edges) {
    for (std::size_t j = 1; j < e.h.size(); ++j) {
      positive = positive && e.M[j] > 0.0 && e.abar[j] > 0.0;
    }
  }
  run.check("coefficients_positive", positive, "M and abar positive on (m, 0]");

  double worst_p = 0.0;
  for (const auto& e : coeffs.edges) {
    const double face = e.M.back() * e.abar.back();
    worst_p = std::max(worst_p, std::fabs(e.p - face) / std::max(1e-300, std::fabs(e.p)));
  }
  run.check("p_equals_boundary_flux", worst_p <= 1e-6,
            "max relative gap " + format_double(worst_p));

  double worst_coarea = 0.0;
  for (const auto& e : coeffs.edges) {
    const auto cum = cumulative_parabolic_sqrt_left(e.M, e.dh());
    const double vol_from_levels = cum.back();
    const double vol_2d =
        model.domain_integral([&](Vec2 x) { return model.well_index(x) == e.k ? 1.0 : 0.0; }).value;
    worst_coarea = std::max(worst_coarea,
                            std::fabs(vol_from_levels - vol_2d) / std::max(1e-300, vol_2d));
  }
  run.check("coarea_volume", worst_coarea <= 1e-6, "max relative gap " + format_double(worst_coarea));

  const double defect = coeffs.compatibility_defect();
  run.check("compatibility_identity", std::fabs(defect) <= 1e-6,
            "vol_E fbar_O + sum int fbar M = " + format_double(defect));

  ordered_json per_edge = ordered_json::array();
  for (const auto& e : coeffs.edges) {
    per_edge.push_back({{"k", e.k}, {"p", e.p}, {"m", e.m}});
  }
  run.add_summary("edges", per_edge);
  run.add_summary("vol_ergodic", coeffs.vol_ergodic);
  run.add_summary("fbar_root", coeffs.fbar_root);
}

void run_occupation(ExperimentRun& run, const Model& model) {
  const auto& cfg = run.cfg();
  const double vol_total = model.domain_integral([](Vec2) { return 1.0; }).value;
  const double vol_erg = model.ergodic_integral([](Vec2) { return 1.0; }).value;
  const double expected = vol_erg / vol_total;

  CsvWriter csv(run.dir() / "occupation.csv", {"eps", "path", "fraction"}, cfg.seed);
  ordered_json rows = ordered_json::array();
  bool ok = true;
  for (const double eps : cfg.eps_ladder) {
    const SimConfig sc = sim_config_for(cfg, eps);
    const OccupationResult occ = simulate_occupation(model, sc, cfg.x0);
    for (std::size_t p = 0; p < occ.per_path.size(); ++p) {
      csv.row({format_double(eps), std::to_string(p), format_double(occ.per_path[p])});
    }
    rows.push_back({{"eps", eps}, {"fraction", occ.fraction}, {"se", occ.standard_error}});
    const double tol = std::max(0.05, 5.0 * occ.standard_error);
    ok = ok && std::fabs(occ.fraction - expected) <= tol;
  }
  run.add_summary("expected_fraction", expected);
  run.add_summary("results", rows);
  run.check("occupation_matches_volume_ratio", ok,
            "expected " + format_double(expected) + " within max(0.05, 5 se)");
}

void run_exit_times(ExperimentRun& run, const Model& model) {
  const auto& cfg = run.cfg();
  CsvWriter csv(run.dir() / "exit_times.csv", {"eps", "kind", "path", "time", "target"},
                cfg.seed);
  CsvWriter summary_csv(run.dir() / "exit_times_summary.csv",
                        {"eps", "kind", "mean", "se", "hit_gamma_prob", "censored_fraction"},
                        cfg.seed);
  ordered_json rows = ordered_json::array();

  std::vector<double> eps_v, transit_mean, hit_prob, down_mean;
  double worst_censor = 0.0;
  for (const double eps : cfg.eps_ladder) {
    const SimConfig sc = sim_config_for(cfg, eps);
    const double band = std::pow(eps, 0.25);

    // (a)+(b): from the outer collar to {gamma, outer-outer collar}.
    const ExitTimeStats band_stats = estimate_exit_time(
        model, sc, StartSpec::on_level(0, band), {{0.0}, {2.0 * band}});
    // (c): from gamma down to the inner collar.
    const ExitTimeStats down_stats = estimate_exit_time(
        model, sc, StartSpec::on_level(0, 0.0), {{-std::sqrt(eps)}});

    for (std::size_t p = 0; p < band_stats.per_path_time.size(); ++p) {
      csv.row({format_double(eps), "band_transit", std::to_string(p),
               format_double(band_stats.per_path_time[p]),
               std::to_string(band_stats.per_path_target[p])});
    }
    for (std::size_t p = 0; p < down_stats.per_path_time.size(); ++p) {
      csv.row({format_double(eps), "gamma_to_inner", std::to_string(p),
               format_double(down_stats.per_path_time[p]),
               std::to_string(down_stats.per_path_target[p])});
    }
    summary_csv.row({format_double(eps), "band_transit", format_double(band_stats.mean),
                     format_double(band_stats.standard_error),
                     format_double(band_stats.hit_fraction[0]),
                     format_double(band_stats.censored_fraction)});
    summary_csv.row({format_double(eps), "gamma_to_inner", format_double(down_stats.mean),
                     format_double(down_stats.standard_error), "1",
                     format_double(down_stats.censored_fraction)});
    rows.push_back({{"eps", eps},
                    {"band_transit_mean", band_stats.mean},
                    {"band_transit_se", band_stats.standard_error},
                    {"hit_gamma_prob", band_stats.hit_fraction[0]},
                    {"gamma_to_inner_mean", down_stats.mean},
                    {"gamma_to_inner_se", down_stats.standard_error},
                    {"censored_band", band_stats.censored_fraction},
                    {"censored_down", down_stats.censored_fraction}});

    eps_v.push_back(eps);
    transit_mean.push_back(band_stats.mean);
    hit_prob.push_back(band_stats.hit_fraction[0]);
    down_mean.push_back(down_stats.mean);
    worst_censor = std::max({worst_censor, band_stats.censored_fraction,
                             down_stats.censored_fraction});
  }

  const double slope_transit = loglog_slope(eps_v, transit_mean);
  const double slope_prob = loglog_slope(eps_v, hit_prob);
  bool down_decreasing = true;
  for (std::size_t i = 1; i < down_mean.size(); ++i)
    down_decreasing = down_decreasing && down_mean[i] < down_mean[i - 1];

  run.add_summary("results", rows);
  run.add_summary("slope_band_transit", slope_transit);
  run.add_summary("slope_hit_gamma", slope_prob);
  run.add_summary("gamma_to_inner_means", down_mean);
  run.check("band_transit_slope", slope_transit >= 0.7,
            "log-log slope " + format_double(slope_transit) + " (>= 0.7)");
  run.check("hit_gamma_slope", slope_prob <= 0.35,
            "log-log slope " + format_double(slope_prob) + " (<= 0.35)");
  run.check("gamma_to_inner_vanishes", down_decreasing,
            "means decrease along the eps ladder");
  run.check("censoring_small", worst_censor <= 0.05,
            "worst censored fraction " + format_double(worst_censor));
}

void run_marginals(ExperimentRun& run, const Model& model) {
  const auto& cfg = run.cfg();
  CoefficientGridSpec spec;
  spec.cells_per_edge = cfg.table_cells;
  spec.convergence_tol = cfg.quad_tol;
  const EdgeCoefficients coeffs = compute_coefficients(model, spec);
  const GeneratorMatrix gen = build_generator(coeffs, cfg.n_cells);
  write_text(run.dir() / "generator.json", gen.to_json() + "\n");

  const GraphPoint y0 = identify(model, cfg.x0);
  const std::vector<double> ctmc = marginal_at(gen, y0, cfg.horizon);

  CsvWriter csv(run.dir() / "marginals.csv",
                {"eps", "bin", "h_lo", "h_hi", "empirical", "ctmc"}, cfg.seed);
  ordered_json rows = ordered_json::array();
  std::vector<double> tvs;
  for (const double eps : cfg.eps_ladder) {
    const SimConfig sc = sim_config_for(cfg, eps);
    const MarginalHistogram hist = empirical_marginal(model, sc, cfg.x0, cfg.horizon, cfg.bins);
    const double tv = tv_distance(hist, gen, ctmc);
    tvs.push_back(tv);
    rows.push_back({{"eps", eps}, {"tv", tv}, {"root_mass", hist.root_mass}});

    const double root_ctmc = ctmc[static_cast<std::size_t>(gen.root_cell())];
    csv.row({format_double(eps), "root", "", "", format_double(hist.root_mass),
             format_double(root_ctmc)});
    for (const auto& e : hist.edges) {
      const double width = -e.m / static_cast<double>(e.mass.size());
      // aggregate CTMC cells into this edge's bins
      std::vector<double> cb(e.mass.size(), 0.0);
      for (const auto& b : gen.blocks) {
        if (b.k != e.k) continue;
        for (int i = 0; i < b.cells; ++i) {
          const double center = b.m + (i + 0.5) * b.dh;
          int bin = static_cast<int>((center - e.m) / width);
          bin = std::max(0, std::min(static_cast<int>(e.mass.size()) - 1, bin));
          cb[static_cast<std::size_t>(bin)] += ctmc[static_cast<std::size_t>(b.first_cell + i)];
        }
      }
      for (std::size_t bidx = 0; bidx < e.mass.size(); ++bidx) {
        csv.row({format_double(eps), std::to_string(bidx), format_double(e.m + width * bidx),
                 format_double(e.m + width * (bidx + 1)), format_double(e.mass[bidx]),
                 format_double(cb[bidx])});
      }
    }
  }
  run.add_summary("tv", rows);

  bool decreasing = true;
  for (std::size_t i = 1; i < tvs.size(); ++i) decreasing = decreasing && tvs[i] < tvs[i - 1];
  run.add_summary("tv_decreasing", decreasing);
  run.check("tv_small_at_finest", tvs.back() <= 0.05,
            "TV at smallest eps = " + format_double(tvs.back()));
}

void run_bvp(ExperimentRun& run, const Model& model) {
  const auto& cfg = run.cfg();
  CoefficientGridSpec spec;
  spec.cells_per_edge = cfg.table_cells;
  spec.convergence_tol = cfg.quad_tol;
  const EdgeCoefficients coeffs = compute_coefficients(model, spec);
  const GraphPoint xo = identify(model, model.normalization_point());
  const GraphSolution sol = solve_bvp(coeffs, xo);

  CsvWriter csv(run.dir() / "solution.csv", {"k", "h", "v", "flux"}, cfg.seed);
  for (const auto& e : sol.edges) {
    for (std::size_t j = 0; j < e.h.size(); ++j) {
      csv.row({std::to_string(e.k), format_double(e.h[j]), format_double(e.v[j]),
               format_double(e.flux[j])});
    }
  }
  ordered_json js;
  js["v_root"] = sol.v_root;
  js["gluing_residual"] = sol.gluing_residual;
  js["gluing_scale"] = sol.gluing_scale;
  write_text(run.dir() / "solution.json", js.dump(2) + "\n");

  run.add_summary("v_root", sol.v_root);
  run.add_summary("gluing_residual", sol.gluing_residual);
  run.check("gluing_residual_small",
            std::fabs(sol.gluing_residual) <= 1e-8 * sol.gluing_scale,
            "residual " + format_double(sol.gluing_residual));
  const double at_xo = evaluate(sol, xo);
  run.check("normalization", std::fabs(at_xo) <= 1e-10, "v at x_O image = " + format_double(at_xo));
  bool continuity = true;
  for (const auto& e : sol.edges) continuity = continuity && std::fabs(e.v.back() - sol.v_root) <= 1e-12;
  run.check("continuity_at_root", continuity, "v(k, 0) equals v(O) for all edges");
}

void run_compare(ExperimentRun& run, const Model& model) {
  const auto& cfg = run.cfg();
  CoefficientGridSpec spec;
  spec.cells_per_edge = cfg.table_cells;
  spec.convergence_tol = cfg.quad_tol;
  const EdgeCoefficients coeffs = compute_coefficients(model, spec);
  const GraphPoint xo = identify(model, model.normalization_point());
  const GraphSolution sol = solve_bvp(coeffs, xo);

  const std::vector<Vec2> probes = compare_probe_set();
  run.set_probe_set(probes);

  CsvWriter csv(run.dir() / "compare.csv",
                {"eps", "probe_x", "probe_y", "u_hat", "se", "v_limit", "abs_err",
                 "tail_decayed"}, cfg.seed);
  ordered_json rows = ordered_json::array();
  std::vector<double> max_err, max_err_se;
  for (const double eps : cfg.eps_ladder) {
    const SimConfig sc = sim_config_for(cfg, eps);
    const auto estimates = feynman_kac_batch(model, sc, probes, cfg.t_max);
    double worst = -1.0, worst_se = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double v_limit = evaluate(sol, identify(model, probes[i]));
      const double err = std::fabs(estimates[i].value - v_limit);
      csv.row({format_double(eps), format_double(probes[i].x), format_double(probes[i].y),
               format_double(estimates[i].value), format_double(estimates[i].standard_error),
               format_double(v_limit), format_double(err),
               estimates[i].tail_decayed ? "1" : "0"});
      if (err > worst) {
        worst = err;
        worst_se = estimates[i].standard_error;
      }
    }
    max_err.push_back(worst);
    max_err_se.push_back(worst_se);
    rows.push_back({{"eps", eps}, {"max_abs_err", worst}, {"se_at_max", worst_se}});
  }
  run.add_summary("max_abs_err", rows);

  bool decreasing = true;
  for (std::size_t i = 1; i < max_err.size(); ++i)
    decreasing = decreasing && max_err[i] < max_err[i - 1];
  run.check("max_err_decreasing", decreasing, "max |u_hat - v| decreases along the eps ladder");
}

}  // namespace

int run_experiment(const ExperimentConfig& config, const std::string& out_dir_override,
                   int workers_override) {
  std::string dir = !out_dir_override.empty() ? out_dir_override : config.out_dir;
  try {
    config.validate();
    ExperimentRun run(config, out_dir_override, workers_override);
    ModelOptions options;
    options.forcing = config.forcing;
    options.has_x_o = config.has_x_o;
    options.x_o = config.x_o;
    const auto model = make_model(config.model, options);
    if (config.experiment == "coefficients") run_coefficients(run, *model);
    else if (config.experiment == "occupation") run_occupation(run, *model);
    else if (config.experiment == "exit-times") run_exit_times(run, *model);
    else if (config.experiment == "marginals") run_marginals(run, *model);
    else if (config.experiment == "bvp") run_bvp(run, *model);
    else if (config.experiment == "compare") run_compare(run, *model);
    return run.finish();
  } catch (const std::exception& e) {
    try {
      fs::create_directories(dir);
      ordered_json err;
      err["experiment"] = config.experiment;
      err["error"] = e.what();
      write_text(fs::path(dir) / "error.json", err.dump(2) + "\n");
    } catch (...) {
    }
    return 2;
  }
}

std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV file: " + path);
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty() && item.back() == '\r') item.pop_back();
      out.push_back(item);
    }
    return out;
  };
  const auto header = split(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto vals = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < vals.size(); ++i) row[header[i]] = vals[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace stargraph
