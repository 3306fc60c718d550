// pdflow command line: simulate / certify / reproduce / sweep / connectivity.
#include "pdflow/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual flow simulator and certificate engine"};
  app.require_subcommand(1);

  std::string config, trajectory, graph, experiment, out_dir;

  auto* simulate = app.add_subcommand("simulate", "Integrate the flow and write a trajectory CSV");
  simulate->add_option("--config", config, "run config (JSON)")->required();

  auto* certify = app.add_subcommand("certify", "Certificate report for the configured gains");
  certify->add_option("--config", config, "run config (JSON)")->required();
  certify->add_option("--trajectory", trajectory, "trajectory CSV to check inequalities along");

  auto* reproduce = app.add_subcommand("reproduce", "Re-run a figure's parameter grid");
  reproduce->add_option("experiment", experiment, "fig3 | fig4 | fig5")
      ->required()
      ->check(CLI::IsMember({"fig3", "fig4", "fig5"}));
  reproduce->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "Run a gain/scale grid");
  sweep->add_option("--config", config, "run config with a sweep block")->required();

  auto* connectivity = app.add_subcommand("connectivity", "Spectral data of a graph");
  connectivity->add_option("--graph", graph, "graph file, or benchmark / benchmark_x4")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pdflow::kExitConfigError;
  }

  if (*simulate) return pdflow::cmd_simulate(config, std::cout, std::cerr);
  if (*certify) {
    std::optional<std::filesystem::path> traj;
    if (!trajectory.empty()) traj = trajectory;
    return pdflow::cmd_certify(config, traj, std::cout, std::cerr);
  }
  if (*reproduce) {
    std::optional<std::filesystem::path> dir;
    if (!out_dir.empty()) dir = out_dir;
    return pdflow::cmd_reproduce(experiment, dir, std::cout, std::cerr);
  }
  if (*sweep) return pdflow::cmd_sweep(config, std::cout, std::cerr);
  return pdflow::cmd_connectivity(graph, std::cout, std::cerr);
}
