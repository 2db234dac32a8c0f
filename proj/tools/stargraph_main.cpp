#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stargraph/harness.hpp"
#include "stargraph/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stargraph: slow-fast reflected diffusions and their graph limit"};
  app.set_version_flag("--version", std::string(stargraph::kProjectVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int workers = 0;
  auto* run = app.add_subcommand("run", "run an experiment described by a config file");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--workers", workers, "worker threads (0 = hardware concurrency)");

  std::string csv_path, spec_path, svg_path = "plot.svg";
  auto* plot = app.add_subcommand("plot", "render a deterministic SVG plot from a CSV");
  plot->add_option("csv", csv_path, "input CSV file")->required();
  plot->add_option("--spec", spec_path, "plot spec JSON file")->required();
  plot->add_option("--out", svg_path, "output SVG path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = stargraph::ExperimentConfig::parse_file(config_path);
      const int rc = stargraph::run_experiment(cfg, out_dir, workers);
      if (rc != 0) std::cerr << "experiment finished with failures (exit " << rc << ")\n";
      return rc;
    }
    if (*plot) {
      const int rows = stargraph::plot_csv(csv_path, spec_path, svg_path);
      std::cout << "wrote " << svg_path << " (" << rows << " rows)\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
