// Acceptance suite: one pass/fail line per criterion, all criteria always run.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stargraph/graph.hpp"
#include "stargraph/graph_bvp.hpp"
#include "stargraph/graph_process.hpp"
#include "stargraph/harness.hpp"
#include "stargraph/model.hpp"
#include "stargraph/parallel.hpp"
#include "stargraph/sde.hpp"

using namespace stargraph;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20260808ULL;
int g_failures = 0;

class Criterion {
 public:
  explicit Criterion(int id, const std::string& title) : id_(id), title_(title) {
    start_ = std::chrono::steady_clock::now();
  }
  void expect(bool ok, const std::string& detail) {
    all_ok_ = all_ok_ && ok;
    details_.push_back((ok ? "ok: " : "FAILED: ") + detail);
  }
  void note(const std::string& text) { details_.push_back("note: " + text); }
  ~Criterion() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::printf("[%s] criterion %d: %s (%.1f s)\n", all_ok_ ? "PASS" : "FAIL", id_,
                title_.c_str(), secs);
    for (const auto& d : details_) std::printf("        %s\n", d.c_str());
    std::fflush(stdout);
    if (!all_ok_) ++g_failures;
  }

 private:
  int id_;
  std::string title_;
  bool all_ok_ = true;
  std::vector<std::string> details_;
  std::chrono::steady_clock::time_point start_;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const EdgeCoefficients& coefficients() {
  static const EdgeCoefficients c = [] {
    AnnulusModel model;
    return compute_coefficients(model);
  }();
  return c;
}

SimConfig make_config(double eps, double horizon, int n_paths, std::uint64_t seed) {
  SimConfig cfg = SimConfig::standard(eps, horizon, n_paths, seed);
  cfg.workers = default_workers();
  return cfg;
}

std::vector<Vec2> probe_points() {
  return {{0.25, 0.0}, {0.5, 0.0}, {0.75, 0.0}, {0.95, 0.0}, {1.1, 0.0},
          {1.25, 0.0}, {1.4, 0.0}, {1.65, 0.0}, {1.9, 0.0}};
}

void criterion_1_coefficients() {
  Criterion c(1, "averaged coefficients match the closed forms to 1e-6 relative");
  const auto& coeffs = coefficients();
  const auto& e = coeffs.edges[0];
  double worst = 0.0;
  for (std::size_t j = 0; j < e.h.size(); ++j) {
    worst = std::max(worst, std::fabs(e.M[j] / oracle::annulus_M(e.h[j]) - 1.0));
    const double abar_ref = oracle::annulus_abar(e.h[j]);
    if (abar_ref > 1e-3)
      worst = std::max(worst, std::fabs(e.abar[j] / abar_ref - 1.0));
  }
  c.expect(worst <= 1e-6, "M, abar relative error " + num(worst));
  c.expect(std::fabs(e.p / oracle::annulus_p() - 1.0) <= 1e-6, "p = " + num(e.p));
  c.expect(std::fabs(coeffs.vol_ergodic / oracle::annulus_vol_ergodic() - 1.0) <= 1e-6,
           "vol(E) = " + num(coeffs.vol_ergodic));
  c.expect(std::fabs(coeffs.fbar_root / oracle::annulus_fbar_root() - 1.0) <= 1e-6,
           "fbar(O) = " + num(coeffs.fbar_root));
}

void criterion_2_compatibility() {
  Criterion c(2, "compatibility identity and gluing residual");
  const auto& coeffs = coefficients();
  const double defect = coeffs.compatibility_defect();
  c.expect(std::fabs(defect) <= 1e-6, "vol(E) fbar(O) + sum int fbar M dh = " + num(defect));

  AnnulusModel model;
  const GraphSolution sol = solve_bvp(coeffs, identify(model, model.normalization_point()));
  c.expect(std::fabs(sol.gluing_residual) <= 1e-8 * sol.gluing_scale,
           "gluing residual " + num(sol.gluing_residual) + " (scale " + num(sol.gluing_scale) + ")");
  // the two root terms of the balance, for the record
  const double dv_end = sol.edges[0].flux.back() / coeffs.edges[0].p;
  c.note("vol(E) fbar(O) = " + num(coeffs.vol_ergodic * coeffs.fbar_root) +
         ", (1/2) p v'(0-) = " + num(0.5 * coeffs.edges[0].p * dv_end));
}

void criterion_3_bvp_oracle() {
  Criterion c(3, "explicit integration agrees with the finite-difference solve to 1e-6");
  AnnulusModel model;
  const GraphSolution sol = solve_bvp(coefficients(), identify(model, model.normalization_point()));
  const oracle::FdBvpOracle fd = oracle::solve_bvp_fd(model, 0, 512);
  double worst = 0.0;
  for (std::size_t j = 0; j < sol.edges[0].h.size(); ++j) {
    worst = std::max(worst,
                     std::fabs(sol.edges[0].v[j] - fd.value_at_level(sol.edges[0].h[j])));
  }
  c.expect(worst <= 1e-6, "max-norm difference " + num(worst) + " at n = 512");
}

void criterion_4_invariant_measure() {
  Criterion c(4, "occupation of the ergodic region and CTMC stationary mass");
  AnnulusModel model;
  const SimConfig cfg = make_config(1e-3, 50.0, 200, kSeed);
  const OccupationResult occ = simulate_occupation(model, cfg, {1.5, 0.0});
  c.expect(std::fabs(occ.fraction - 0.75) <= 0.05,
           "occupation " + num(occ.fraction) + " +/- " + num(occ.standard_error) +
               " (eps = 1e-3, T = 50, 200 paths)");

  const GeneratorMatrix gen = build_generator(coefficients(), 256);
  const double root_mass = gen.stationary()[0];
  c.expect(std::fabs(root_mass - 0.75) <= 1e-10, "CTMC stationary root mass " + num(root_mass));
}

void criterion_5_weak_convergence() {
  Criterion c(5, "projected marginal approaches the graph-process marginal");
  AnnulusModel model;
  const GeneratorMatrix gen = build_generator(coefficients(), 256);
  const Vec2 x0{0.5, 0.0};
  const double T = 2.0;
  const std::vector<double> ctmc = marginal_at(gen, identify(model, x0), T);

  std::vector<double> tvs;
  for (const double eps : {0.1, 0.03, 0.01}) {
    SimConfig cfg = make_config(eps, T, 10000, kSeed);
    const MarginalHistogram hist = empirical_marginal(model, cfg, x0, T, 32);
    const double tv = tv_distance(hist, gen, ctmc);
    tvs.push_back(tv);
    c.note("eps = " + num(eps) + ": TV = " + num(tv) + ", root mass " + num(hist.root_mass));
  }
  c.expect(tvs[0] > tvs[1] && tvs[1] > tvs[2], "TV decreases along the ladder");
  c.expect(tvs[2] <= 0.05, "TV at eps = 0.01 is " + num(tvs[2]));
}

void criterion_6_limit_equation() {
  Criterion c(6, "Feynman-Kac estimates approach the graph BVP solution");
  AnnulusModel model;
  const GraphSolution sol = solve_bvp(coefficients(), identify(model, model.normalization_point()));
  const std::vector<Vec2> probes = probe_points();
  const double t_max = 12.0;

  std::vector<double> max_err, se_at_max;
  for (const double eps : {0.1, 0.03, 0.01}) {
    SimConfig cfg = make_config(eps, 1.0, 10000, kSeed);
    const auto ests = feynman_kac_batch(model, cfg, probes, t_max);
    double worst = -1.0, worst_se = 0.0, closed_form_gap = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double v_limit = evaluate(sol, identify(model, probes[i]));
      const double err = std::fabs(ests[i].value - v_limit);
      if (err > worst) {
        worst = err;
        worst_se = ests[i].standard_error;
      }
      closed_form_gap = std::max(
          closed_form_gap, std::fabs(oracle::annulus_exact_u(probes[i].x, eps) - v_limit));
    }
    max_err.push_back(worst);
    se_at_max.push_back(worst_se);
    c.note("eps = " + num(eps) + ": max |u_hat - v| = " + num(worst) + " (se " + num(worst_se) +
           "), closed-form |u_eps - v| = " + num(closed_form_gap));
  }
  c.expect(max_err[0] > max_err[1] && max_err[1] > max_err[2],
           "max error decreases along the ladder");
  const double allowance = 2.0 * se_at_max.back() + 0.05;
  c.expect(max_err.back() <= allowance,
           "max error " + num(max_err.back()) + " <= 2 se + 0.05 = " + num(allowance));
}

void criterion_7_exit_scalings() {
  Criterion c(7, "stopping-time scalings across the collar");
  AnnulusModel model;
  std::vector<double> eps_v{1e-2, 3e-3, 1e-3};
  std::vector<double> transit, hit_prob, down;
  double worst_censor = 0.0;
  for (const double eps : eps_v) {
    const SimConfig cfg = make_config(eps, 1.0, 20000, kSeed);
    const double band = std::pow(eps, 0.25);
    const ExitTimeStats a =
        estimate_exit_time(model, cfg, StartSpec::on_level(0, band), {{0.0}, {2.0 * band}});
    const ExitTimeStats d =
        estimate_exit_time(model, cfg, StartSpec::on_level(0, 0.0), {{-std::sqrt(eps)}});
    transit.push_back(a.mean);
    hit_prob.push_back(a.hit_fraction[0]);
    down.push_back(d.mean);
    worst_censor = std::max({worst_censor, a.censored_fraction, d.censored_fraction});
    c.note("eps = " + num(eps) + ": E transit = " + num(a.mean) +
           ", P(hit gamma first) = " + num(a.hit_fraction[0]) +
           ", E time gamma->inner = " + num(d.mean));
  }
  const double slope_a = loglog_slope(eps_v, transit);
  const double slope_b = loglog_slope(eps_v, hit_prob);
  c.expect(slope_a >= 0.7, "transit-time slope " + num(slope_a) + " >= 0.7");
  c.expect(slope_b <= 0.35, "hit-probability slope " + num(slope_b) + " <= 0.35");
  c.expect(down[0] > down[1] && down[1] > down[2],
           "gamma-to-inner times decrease: " + num(down[0]) + ", " + num(down[1]) + ", " +
               num(down[2]));
  c.expect(worst_censor <= 0.05, "worst censored fraction " + num(worst_censor));
}

void criterion_8_determinism() {
  Criterion c(8, "artifacts are byte-identical across runs and worker counts");
  ExperimentConfig cfg;
  cfg.experiment = "occupation";
  cfg.eps_ladder = {0.05};
  cfg.n_paths = 32;
  cfg.horizon = 1.0;
  cfg.seed = kSeed;
  cfg.x0 = {1.5, 0.0};
  cfg.raw["experiment"] = "occupation";

  const fs::path base = fs::temp_directory_path() / "stargraph_acceptance";
  fs::remove_all(base);
  const fs::path d1 = base / "w1", d2 = base / "w2";
  const int rc1 = run_experiment(cfg, d1.string(), 1);
  const int rc2 = run_experiment(cfg, d2.string(), 2);
  c.expect(rc1 == 0 && rc2 == 0, "both runs succeeded");

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  c.expect(slurp(d1 / "occupation.csv") == slurp(d2 / "occupation.csv"),
           "occupation.csv identical for 1 and 2 workers");
  c.expect(slurp(d1 / "summary.json") == slurp(d2 / "summary.json"), "summary.json identical");
}

}  // namespace

int main() {
  std::printf("acceptance suite (seed %llu, %d workers)\n",
              static_cast<unsigned long long>(kSeed), default_workers());
  criterion_1_coefficients();
  criterion_2_compatibility();
  criterion_3_bvp_oracle();
  criterion_4_invariant_measure();
  criterion_5_weak_convergence();
  criterion_6_limit_equation();
  criterion_7_exit_scalings();
  criterion_8_determinism();
  if (g_failures > 0) {
    std::printf("ACCEPTANCE: %d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("ACCEPTANCE: all criteria passed\n");
  return 0;
}
