#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace iwan::cli;

int main(int argc, char** argv) {
  CLI::App app{"Weak adversarial network solver for inverse conductivity problems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int workers = 0;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", seed, "Override the configured seed");
  };
  CLI::App* solve = app.add_subcommand("solve", "Run one solve");
  add_common(solve);
  CLI::App* sweep = app.add_subcommand("sweep", "Run every cell of the sweep_* axes");
  add_common(sweep);
  sweep->add_option("--workers", workers, "Concurrent cells (default IWAN_WORKERS or 1)")->check(CLI::PositiveNumber);
  CLI::App* compare = app.add_subcommand("fdm-compare", "Finite-difference baseline against IWAN on a 2D problem");
  add_common(compare);
  app.add_subcommand("problems", "List the problem catalog");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("problems")) {
      cmd_problems(std::cout);
      return kExitOk;
    }
    const bool is_compare = app.got_subcommand(compare);
    RunConfig config = load_run_config(config_path, is_compare ? fdm_compare_defaults() : RunConfig{});
    for (CLI::App* cmd : {solve, sweep, compare}) {
      if (cmd->parsed() && cmd->count("--seed")) config.solve.seed = seed;
    }
    if (app.got_subcommand(solve)) {
      cmd_solve(config, out_dir, std::cout);
      return kExitOk;
    }
    if (app.got_subcommand(sweep)) return cmd_sweep(config, out_dir, resolve_workers(workers), std::cout);
    return cmd_fdm_compare(config, out_dir, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRunFailed;
  }
}
