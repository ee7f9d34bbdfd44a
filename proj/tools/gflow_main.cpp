// Command-line front end: run, plot, certify, gen-data.
// Exit codes: 0 success, 1 usage or config error, 2 certificate refused or mismatched.
#include "gflow/experiment.hpp"
#include "gflow/util.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

int run_cmd(const std::string& path) {
  const auto cfg = gflow::load_experiment_config(path);
  const auto result = gflow::run_experiment(cfg);
  for (const auto& r : result.runs) {
    std::cout << r.id << "  P=" << r.params << " nM=" << r.constraints << "  lambda0=" << gflow::format_double(r.lambda0)
              << "  " << gflow::to_string(r.status);
    if (r.aborted) std::cout << " (aborted)";
    std::cout << "\n";
  }
  std::cout << "wrote " << result.output_dir << "\n";
  if (result.exit_code != 0) std::cerr << "error: an over-parametrized run was not certified\n";
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-flow training simulator with NTK convergence certificates"};
  app.require_subcommand(1);

  std::string config_path, dir;
  std::optional<double> tol;

  auto* run = app.add_subcommand("run", "integrate every sweep point and seed, write trajectories and certificates");
  run->add_option("config", config_path, "experiment config (TOML)")->required();
  auto* plot = app.add_subcommand("plot", "render loss curves with certified envelopes as SVG");
  plot->add_option("dir", dir, "output directory of a run")->required();
  auto* certify = app.add_subcommand("certify", "re-derive certificates from stored trajectories");
  certify->add_option("dir", dir, "output directory of a run")->required();
  certify->add_option("--tol", tol, "relative tolerance override")->check(CLI::NonNegativeNumber);
  auto* gen = app.add_subcommand("gen-data", "write the dataset (and graph) described by a config");
  gen->add_option("config", config_path, "experiment config (TOML)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return run_cmd(config_path);
    if (*plot) {
      for (const auto& p : gflow::plot_directory(dir)) std::cout << "wrote " << p << "\n";
      return 0;
    }
    if (*certify) {
      const auto outcome = gflow::certify_directory(dir, tol);
      for (const auto& m : outcome.messages) (outcome.exit_code ? std::cerr : std::cout) << m << "\n";
      return outcome.exit_code;
    }
    if (*gen) {
      for (const auto& p : gflow::gen_data(gflow::load_experiment_config(config_path))) std::cout << "wrote " << p << "\n";
      return 0;
    }
  } catch (const gflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
