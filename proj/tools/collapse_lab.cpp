// collapse-lab: command-line front end for the collapse laboratory.
//
//   collapse-lab <mode> --config <path> --out <dir> [--workers N] [--seed S]
//
// Modes: simulate, modulation, phi1, integrals, perturbation, sweep, compare.
// Exit codes: 0 pass, 1 residual breach, 2 usage or I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <thread>

#include "collapse/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for equivariant Yang-Mills collapse"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  unsigned long long seed = 12345;
  double lambda_dot = 0.0, zmax = 0.0;

  const char* mode_names[] = {"simulate", "modulation", "phi1",
                              "integrals", "perturbation", "sweep", "compare"};
  for (const char* name : mode_names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "bound on concurrent simulations");
    sub->add_option("--seed", seed, "seed recorded in summary.json");
    if (std::string(name) == "phi1") {
      sub->add_option("--lambda-dot", lambda_dot, "scale speed in (0,1)");
      sub->add_option("--zmax", zmax, "outer end of the z range");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 2;
  }

  try {
    collapse::harness::Config cfg;
    if (!config_path.empty()) cfg = collapse::harness::Config::load(config_path);
    const std::string mode = app.get_subcommands().front()->get_name();
    if (mode == "phi1") {
      if (lambda_dot > 0.0) cfg.kv["lambda_dot"] = collapse::harness::fmt17(lambda_dot);
      if (zmax > 0.0) cfg.kv["zmax"] = collapse::harness::fmt17(zmax);
    }
    auto res = collapse::harness::run_plan(mode, cfg, out_dir, workers, seed);
    return res.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
