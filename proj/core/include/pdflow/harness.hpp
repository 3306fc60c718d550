#pragma once

#include "pdflow/certificates.hpp"
#include "pdflow/costs.hpp"
#include "pdflow/digraph.hpp"
#include "pdflow/dynamics.hpp"
#include "pdflow/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace pdflow {

/// Exit-code contract of the CLI.
enum ExitCode : int {
  kExitConverged = 0,
  kExitConfigError = 1,
  kExitDiverged = 2,
  kExitInfeasible = 3,
  kExitNotConverged = 4,  ///< finished the horizon without meeting the tolerance
};

/// Overrides every configured output directory when set.
inline constexpr const char* kOutDirEnv = "PDFLOW_OUT_DIR";

/// Default storage level a "certified" horizon is sized to reach.
inline constexpr double kCertifiedHorizonStorage = 1e-13;

/// A run config with every source loaded and every "certified" entry resolved.
struct Setup {
  Problem problem;
  Digraph base_graph{Eigen::MatrixXd::Zero(2, 2)};
  Digraph graph{Eigen::MatrixXd::Zero(2, 2)};  ///< after scaling
  double graph_scale = 1.0;
  SpectralData sd;
  Constants constants;
  Gains gains;
  IntegratorConfig integrator;
  std::uint64_t seed = 0;
  State s0;
  std::optional<CertificateReport> report;  ///< empty when α² <= 4β
  double convergence_tol = 1e-6;
};

/// Throws ConfigError / ValidationError / NonConvexError on bad input.
Setup resolve(const RunConfig& cfg);

struct Outcome {
  Trajectory traj;
  int exit_code = kExitConverged;
  double final_err = 0.0;
};

Outcome run(const Setup& setup);

/// Output directory after applying the environment override.
std::filesystem::path output_dir(const std::string& configured);

int cmd_simulate(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_certify(const std::filesystem::path& config,
                const std::optional<std::filesystem::path>& trajectory, std::ostream& out,
                std::ostream& err);
/// `out_dir` wins over the environment variable, which wins over "reproduce".
int cmd_reproduce(const std::string& experiment,
                  const std::optional<std::filesystem::path>& out_dir, std::ostream& out,
                  std::ostream& err);
int cmd_sweep(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
/// `graph` may also be "benchmark" or "benchmark_x4".
int cmd_connectivity(const std::string& graph, std::ostream& out, std::ostream& err);

}  // namespace pdflow
