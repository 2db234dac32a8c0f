#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stargraph/geometry.hpp"

namespace stargraph {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Declarative experiment description, parsed from a key = value file.
// Documented schema: see README (section "Experiment configs").
struct ExperimentConfig {
  std::string experiment;  // coefficients | occupation | exit-times | marginals | bvp | compare
  std::string model = "annulus";
  std::string forcing = "radial-shifted";
  std::string scheme = "foliation-split";
  std::vector<double> eps_ladder;
  std::uint64_t seed = 1;
  int n_paths = 100;
  double horizon = 1.0;
  double t_max = 12.0;
  double dt_factor = 0.01;  // dt = dt_factor * eps
  int n_cells = 256;        // generator cells per edge
  int table_cells = 512;    // coefficient tabulation cells per edge
  int bins = 32;
  Vec2 x0{0.5, 0.0};
  bool has_x_o = false;     // optional override of the model normalization point
  Vec2 x_o{0.0, 0.0};
  double quad_tol = 1e-7;   // level-quadrature refinement tolerance
  int validate_samples = 10000;
  int workers = 0;  // 0: hardware concurrency
  bool record_timing = false;
  std::string out_dir = "out";

  std::map<std::string, std::string> raw;  // echoed into the manifest

  static ExperimentConfig parse_file(const std::string& path);
  static ExperimentConfig parse_text(const std::string& text);
  void validate() const;
};

// Runs the experiment, writing manifest.json, CSV artifacts and summaries
// into out_dir. Returns 0 when all built-in assertions pass, 1 when an
// assertion fails and 2 on configuration/runtime errors (error.json written).
int run_experiment(const ExperimentConfig& config, const std::string& out_dir_override = "",
                   int workers_override = 0);

// Deterministic SVG line/scatter plot of two CSV columns; the spec file is a
// JSON document {"x":..., "y":..., "logx":bool, "logy":bool, "fit":bool,
// "title":...}. Returns the number of data rows plotted.
int plot_csv(const std::string& csv_path, const std::string& spec_path,
             const std::string& out_svg_path);

// Shared helpers (used by the CLI and tests).
std::string format_double(double v);
std::vector<std::map<std::string, std::string>> read_csv(const std::string& path);

// Least-squares slope of log(y) against log(x); requires positive data.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace stargraph
