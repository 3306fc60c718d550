#pragma once

#include "pdflow/certificates.hpp"
#include "pdflow/costs.hpp"
#include "pdflow/digraph.hpp"
#include "pdflow/dynamics.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pdflow {

inline constexpr const char* kRunSchema = "pdflow.run/1";
inline constexpr const char* kProblemSchema = "pdflow.problem/1";

// Graph files: {"n": 5, "edges": [{"from": 1, "to": 2, "weight": 1.0}, ...]}
// with 1-based node ids; `to` receives from `from`.
Digraph parse_graph(const std::string& text);
Digraph read_graph(const std::filesystem::path& path);
std::string graph_to_json(const Digraph& g);

/// FNV-1a over the adjacency entries, hex. Identifies the graph in metadata.
std::string graph_hash(const Digraph& g);

// Problem files: {"schema": "pdflow.problem/1", "m": 4, "box_halfwidth": 5,
//   "agents": [{"H": [row-major m*m], "c": [...],
//               "exp_atoms": [{"a": 1, "e": [...]}], "sin_atoms": [{"b": 1, "s": [...]}]}]}
Problem parse_problem(const std::string& text);
Problem read_problem(const std::filesystem::path& path);
std::string problem_to_json(const Problem& p);

/// A number, or the string "certified" (resolved against the certificate).
struct Tunable {
  std::optional<double> value;
  bool certified() const { return !value.has_value(); }
};

struct SweepGrid {
  std::vector<double> alpha;         ///< empty: use the run's alpha
  std::vector<double> gamma;         ///< absolute values
  std::vector<double> gamma_factor;  ///< multiples of gamma_max
  std::vector<double> scale;         ///< graph scales; empty: use the run's
  double T_uncertified = 20.0;       ///< horizon for cells without a certificate
  int workers = 0;                   ///< 0: hardware concurrency
};

struct RunConfig {
  std::string problem = "benchmark";  ///< "benchmark" or a file path
  std::string graph = "benchmark";    ///< "benchmark", "benchmark_x4" or a file path
  Tunable graph_scale{1.0};
  double alpha = 5.0;
  double beta = 1.0;
  Tunable gamma{0.0};
  IntegratorConfig integrator;
  Tunable horizon{20.0};              ///< integrator.T, possibly "certified"
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  double convergence_tol = 1e-6;
  std::optional<SweepGrid> sweep;
  std::filesystem::path base_dir;     ///< directory relative paths resolve against
};

/// Throws ConfigError on malformed text, unknown keys or a wrong schema.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir = {});
RunConfig read_run_config(const std::filesystem::path& path);

/// `t, x_<i>_<k>..., z_<i>_<k>..., V, f_x, xLx, zLz, err_norm` (1-based i, k).
std::string trajectory_csv_header(int agents, int m);
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int m);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, int m);

struct CsvTrajectory {
  std::vector<double> times;
  std::vector<State> states;
};

/// Reads the states back (derived columns are ignored). Throws ConfigError.
CsvTrajectory read_trajectory_csv(const std::filesystem::path& path, int agents, int m);

struct RunMetadata {
  std::uint64_t seed = 0;
  Gains gains;
  std::string graph_hash;
  double graph_scale = 1.0;
  IntegratorConfig integrator;
  std::string status;
  double final_err = 0.0;
  double blowup_time = 0.0;
  long steps = 0;
  int exit_code = 0;
};

std::string metadata_to_json(const RunMetadata& md);

std::string report_to_json(const CertificateReport& rep,
                           const std::optional<DissipationReport>& dissipation = std::nullopt,
                           const std::optional<SectorReport>& sector = std::nullopt,
                           const std::optional<RateEstimate>& rate = std::nullopt);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pdflow
