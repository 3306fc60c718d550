#include "pdflow/harness.hpp"

#include "pdflow/benchmark_problem.hpp"
#include "pdflow/error.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>
#include <thread>

namespace pdflow {

using nlohmann::json;

namespace {

std::filesystem::path resolve_path(const RunConfig& cfg, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || cfg.base_dir.empty() ? path : cfg.base_dir / path;
}

Digraph load_graph(const std::string& source, const RunConfig* cfg) {
  if (source == "benchmark") return benchmark_graph(1.0);
  if (source == "benchmark_x4") return benchmark_graph(4.0);
  return read_graph(cfg ? resolve_path(*cfg, source) : std::filesystem::path(source));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::filesystem::path output_dir(const std::string& configured) {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return configured;
}

Setup resolve(const RunConfig& cfg) {
  Setup s;
  s.problem = cfg.problem == "benchmark" ? benchmark_problem()
                                         : read_problem(resolve_path(cfg, cfg.problem));
  s.base_graph = load_graph(cfg.graph, &cfg);
  if (s.base_graph.size() != s.problem.agents()) {
    throw ConfigError("graph has " + std::to_string(s.base_graph.size()) +
                      " nodes but the problem has " + std::to_string(s.problem.agents()) +
                      " agents");
  }
  s.constants = certify_constants(s.problem);
  s.seed = cfg.seed;
  s.convergence_tol = cfg.convergence_tol;
  s.integrator = cfg.integrator;
  const SpectralData base_sd = spectral_data(s.base_graph);

  if (cfg.graph_scale.certified() && cfg.gamma.certified()) {
    throw ConfigError("graph_scale and gamma cannot both be \"certified\"");
  }
  s.gains = Gains{cfg.alpha, cfg.beta, cfg.gamma.value.value_or(0.0)};
  if (cfg.graph_scale.certified()) {
    if (!(s.gains.gamma > 0.0)) throw ConfigError("a certified graph scale needs gamma > 0");
    const PMPair pm = build_pm(cfg.alpha, cfg.beta);
    s.graph_scale = required_connectivity(s.gains, pm, base_sd, s.constants).certified_scale;
  } else {
    s.graph_scale = *cfg.graph_scale.value;
  }
  s.graph = s.graph_scale == 1.0 ? s.base_graph : scale(s.base_graph, s.graph_scale);
  s.sd = s.graph_scale == 1.0 ? base_sd : spectral_data(s.graph);

  if (cfg.gamma.certified()) {
    const PMPair pm = build_pm(cfg.alpha, cfg.beta);
    s.gains.gamma = kStrictnessMargin * gamma_max(pm, s.sd, s.constants).value;
  }
  try {
    s.report = certify(s.gains, s.sd, s.constants, s.problem.agents());
  } catch (const GainConditionError&) {
    s.report.reset();
  }

  s.s0 = random_initial_state(s.problem, cfg.seed);
  if (cfg.horizon.certified()) {
    if (!s.report || !(s.report->decay_rate > 0.0)) {
      throw ConfigError("T = \"certified\" needs a feasible certificate with a positive rate");
    }
    const State eq = reachable_equilibrium(s.problem, s.sd, s.gains, s.s0);
    const double V0 = storage(s.s0, eq, s.report->pm, s.sd);
    const double V_end = cfg.integrator.stop_storage_below.value_or(kCertifiedHorizonStorage);
    s.integrator.T = std::max(std::log(V0 / V_end), 1.0) / s.report->decay_rate;
  }
  return s;
}

Outcome run(const Setup& setup) {
  std::optional<StorageWeights> weights;
  if (setup.report) weights = setup.report->pm.weights();
  IntegratorConfig ic = setup.integrator;
  if (!weights) ic.stop_storage_below.reset();
  Outcome o;
  o.traj = integrate(setup.problem, setup.sd, setup.gains, setup.s0, ic, weights);
  o.final_err = o.traj.final_observables().err_norm;
  if (o.traj.status == RunStatus::Diverged) {
    o.exit_code = kExitDiverged;
  } else {
    o.exit_code = o.final_err < setup.convergence_tol ? kExitConverged : kExitNotConverged;
  }
  return o;
}

namespace {

RunMetadata metadata(const Setup& s, const Outcome& o) {
  RunMetadata md;
  md.seed = s.seed;
  md.gains = s.gains;
  md.graph_hash = graph_hash(s.graph);
  md.graph_scale = s.graph_scale;
  md.integrator = s.integrator;
  md.status = to_string(o.traj.status);
  md.final_err = o.final_err;
  md.blowup_time = o.traj.blowup_time;
  md.steps = o.traj.steps;
  md.exit_code = o.exit_code;
  return md;
}

const char* describe(int code) {
  switch (code) {
    case kExitConverged: return "converged";
    case kExitDiverged: return "diverged";
    case kExitNotConverged: return "not converged";
    case kExitInfeasible: return "infeasible";
    default: return "error";
  }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const RankError& e) {
    err << "graph rank error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const GainConditionError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NonConvexError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace

int cmd_simulate(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = read_run_config(config);
    const Setup s = resolve(cfg);
    const Outcome o = run(s);
    const auto dir = output_dir(cfg.output_dir);
    write_trajectory_csv(dir / "trajectory.csv", o.traj, s.problem.m);
    write_text_file(dir / "metadata.json", metadata_to_json(metadata(s, o)));
    const auto& last = o.traj.final_observables();
    out << describe(o.exit_code) << ": t = " << fmt(o.traj.times.back())
        << ", err_norm = " << fmt(o.final_err) << ", xLx = " << fmt(last.xLx)
        << ", zLz = " << fmt(last.zLz) << ", gamma = " << fmt(s.gains.gamma)
        << ", steps = " << o.traj.steps << "\n";
    if (o.traj.status == RunStatus::Diverged) {
      out << "blow-up at t = " << fmt(o.traj.blowup_time) << "\n";
    }
    out << "wrote " << (dir / "trajectory.csv").string() << "\n";
    return o.exit_code;
  });
}

int cmd_certify(const std::filesystem::path& config,
                const std::optional<std::filesystem::path>& trajectory, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&]() -> int {
    const RunConfig cfg = read_run_config(config);
    const Setup s = resolve(cfg);
    const auto dir = output_dir(cfg.output_dir);
    if (!s.report) {
      json j{{"feasible", false},
             {"reason", "alpha^2 <= 4 beta"},
             {"gains", {{"alpha", s.gains.alpha}, {"beta", s.gains.beta}, {"gamma", s.gains.gamma}}}};
      write_text_file(dir / "certificate.json", j.dump(2) + "\n");
      out << j.dump(2) << "\n";
      return kExitInfeasible;
    }
    CertificateReport rep = *s.report;
    std::optional<DissipationReport> diss;
    std::optional<SectorReport> sector;
    std::optional<RateEstimate> rate;
    if (trajectory) {
      const CsvTrajectory csv = read_trajectory_csv(*trajectory, s.problem.agents(), s.problem.m);
      Trajectory traj;
      traj.times = csv.times;
      traj.states = csv.states;
      traj.equilibrium = reachable_equilibrium(s.problem, s.sd, s.gains, csv.states.front());
      const FlowModel model(s.problem, s.sd, s.gains);
      for (const auto& st : traj.states) {
        traj.observables.push_back(observe(model, st, traj.equilibrium, rep.pm.weights()));
      }
      diss = check_dissipation(traj, rep.pm, s.sd, s.gains, s.problem, rep.delta_choice);
      sector = check_sector(s.problem, s.sd, traj.equilibrium.x, s.constants, 10000, s.seed);
      rep.margins["dissipation"] = 1e-6 - diss->max_relative_violation;
      rep.margins["sector"] = sector->min_slack_sector + 1e-9;
      rep.margins["growth"] = sector->min_slack_growth + 1e-9;
      try {
        rate = rate_estimate(traj, rep);
        rep.margins["rate"] = rate->certified + 1e-3 - rate->fitted;
      } catch (const FitWindowError& e) {
        err << "note: " << e.what() << "\n";
      }
      rep.refresh();
    }
    const std::string text = report_to_json(rep, diss, sector, rate);
    write_text_file(dir / "certificate.json", text);
    out << text;
    return rep.feasible ? kExitConverged : kExitInfeasible;
  });
}

int cmd_connectivity(const std::string& graph, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const Digraph g = load_graph(graph, nullptr);
    json j{{"n", g.size()},
           {"graph_hash", graph_hash(g)},
           {"weight_balanced", g.weight_balanced()},
           {"strongly_connected", strongly_connected(g)}};
    if (!strongly_connected(g)) {
      out << j.dump(2) << "\n";
      return kExitInfeasible;
    }
    const SpectralData sd = spectral_data(g);
    j["r"] = std::vector<double>(sd.r.data(), sd.r.data() + sd.r.size());
    j["rho"] = sd.rho;
    j["rmin"] = sd.rmin;
    j["rho_rmin"] = sd.rho * sd.rmin;
    out << j.dump(2) << "\n";
    return kExitConverged;
  });
}

// --- reproduction -------------------------------------------------------------

namespace {

struct Curve {
  std::string file;
  std::string label;
  json params;
};

/// gnuplot column (1-based) of a derived quantity in the trajectory CSV.
int column(int agents, int m, const std::string& name) {
  const int base = 2 + 2 * agents * m;
  if (name == "V") return base;
  if (name == "f_x") return base + 1;
  if (name == "xLx") return base + 2;
  if (name == "zLz") return base + 3;
  return base + 4;  // err_norm
}

std::string plot_script(const std::string& title, const std::vector<Curve>& curves,
                        const std::vector<std::pair<std::string, std::string>>& panels, int agents,
                        int m) {
  std::ostringstream g;
  g << "# gnuplot script; run from this directory: gnuplot " << title << ".gp\n";
  g << "set datafile separator ','\n";
  g << "set terminal pngcairo size " << 640 * panels.size() << ",480\n";
  g << "set output '" << title << ".png'\n";
  g << "set multiplot layout 1," << panels.size() << "\n";
  g << "set xlabel 't'\n";
  for (const auto& [quantity, mode] : panels) {
    const int col = column(agents, m, quantity);
    if (mode == "log") {
      g << "set logscale y\nset format y '%.0e'\n";
    } else {
      g << "unset logscale y\nset format y '%g'\n";
    }
    const std::string expr = mode == "log" ? "(abs($" + std::to_string(col) + "))"
                                           : "($" + std::to_string(col) + ")";
    const std::string shown = mode == "lnerr" ? "(log($" + std::to_string(col) + "))" : expr;
    g << "set title '" << (mode == "lnerr" ? "log " + quantity : quantity) << "'\n";
    g << "plot ";
    for (std::size_t i = 0; i < curves.size(); ++i) {
      if (i) g << ", \\\n     ";
      g << "'" << curves[i].file << "' every ::1 using 1:" << shown << " with lines title '"
        << curves[i].label << "'";
    }
    g << "\n";
  }
  g << "unset multiplot\n";
  return g.str();
}

json fit_json(const Trajectory& traj) {
  std::vector<double> t, e;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double err = traj.observables[k].err_norm;
    if (err > 1e-12 && err < 1e-1) {
      t.push_back(traj.times[k]);
      e.push_back(err);
    }
  }
  try {
    const LinearFit f = log_linear_fit(t, e);
    return {{"slope", f.slope}, {"r2", f.r2}, {"points", f.points}};
  } catch (const FitWindowError&) {
    return nullptr;
  }
}

}  // namespace

int cmd_reproduce(const std::string& experiment,
                  const std::optional<std::filesystem::path>& out_dir, std::ostream& out,
                  std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (experiment != "fig3" && experiment != "fig4" && experiment != "fig5") {
      throw ConfigError("unknown experiment '" + experiment + "' (fig3, fig4, fig5)");
    }
    const std::filesystem::path dir = out_dir ? *out_dir : output_dir("reproduce");
    const Problem problem = benchmark_problem();

    struct Run {
      double alpha, gamma, weight;
      std::string file, label;
    };
    std::vector<Run> specs;
    std::vector<std::pair<std::string, std::string>> panels;
    if (experiment == "fig3") {
      specs = {{1.0, 0.0, 1.0, "fig3_alpha1.csv", "alpha = 1"},
               {5.0, 0.0, 1.0, "fig3_alpha5.csv", "alpha = 5"}};
      panels = {{"xLx", "log"}, {"zLz", "log"}};
    } else if (experiment == "fig4") {
      specs = {{5.0, 0.1, 1.0, "fig4_gamma0.1.csv", "gamma = 0.1"},
               {5.0, 0.5, 1.0, "fig4_gamma0.5.csv", "gamma = 0.5"}};
      panels = {{"f_x", "linear"}};
    } else {
      specs = {{5.0, 0.5, 4.0, "fig5_gamma0.5_x4.csv", "gamma = 0.5, weights 4"}};
      panels = {{"f_x", "linear"}, {"err_norm", "lnerr"}};
    }

    json manifest;
    manifest["experiment"] = experiment;
    manifest["graph"] = benchmark_graph_description();
    manifest["graph_is_substitute"] = true;
    manifest["runs"] = json::array();
    std::vector<Curve> curves;
    constexpr std::uint64_t kSeed = 1;
    const State s0 = random_initial_state(problem, kSeed);
    IntegratorConfig ic;
    ic.method = Method::Rk4;
    ic.dt = 1e-3;
    ic.T = 20.0;
    ic.record_stride = 10;

    for (const auto& sp : specs) {
      const Digraph g = benchmark_graph(sp.weight);
      const SpectralData sd = spectral_data(g);
      const Gains gains{sp.alpha, 1.0, sp.gamma};
      std::optional<StorageWeights> w;
      if (sp.alpha * sp.alpha > 4.0) w = build_pm(sp.alpha, 1.0).weights();
      const Trajectory traj = integrate(problem, sd, gains, s0, ic, w);
      write_trajectory_csv(dir / sp.file, traj, problem.m);
      json run{{"file", sp.file},
               {"alpha", sp.alpha},
               {"beta", 1.0},
               {"gamma", sp.gamma},
               {"edge_weight", sp.weight},
               {"graph_hash", graph_hash(g)},
               {"seed", kSeed},
               {"dt", ic.dt},
               {"T", ic.T},
               {"method", to_string(ic.method)},
               {"status", to_string(traj.status)},
               {"final_xLx", traj.final_observables().xLx},
               {"final_err", traj.final_observables().err_norm}};
      if (traj.status == RunStatus::Diverged) run["blowup_time"] = traj.blowup_time;
      if (experiment == "fig5") run["log_error_fit"] = fit_json(traj);
      manifest["runs"].push_back(run);
      curves.push_back({sp.file, sp.label, {}});
      out << experiment << ": " << sp.label << " -> " << to_string(traj.status)
          << ", final err_norm = " << fmt(traj.final_observables().err_norm) << "\n";
    }
    write_text_file(dir / (experiment + ".gp"),
                    plot_script(experiment, curves, panels, problem.agents(), problem.m));
    write_text_file(dir / (experiment + "_manifest.json"), manifest.dump(2) + "\n");
    write_text_file(dir / "graph.json", graph_to_json(benchmark_graph(specs.front().weight)));
    out << "wrote " << dir.string() << "\n";
    return kExitConverged;
  });
}

// --- sweeps -------------------------------------------------------------------

int cmd_sweep(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const RunConfig cfg = read_run_config(config);
    if (!cfg.sweep) throw ConfigError("sweep config needs a \"sweep\" block");
    const SweepGrid& grid = *cfg.sweep;

    struct Cell {
      double alpha, scale, gamma_arg;
      bool gamma_is_factor;
    };
    const std::vector<double> alphas = grid.alpha.empty() ? std::vector<double>{cfg.alpha} : grid.alpha;
    const std::vector<double> scales =
        grid.scale.empty() ? std::vector<double>{cfg.graph_scale.value.value_or(1.0)} : grid.scale;
    std::vector<double> gammas = grid.gamma_factor.empty() ? grid.gamma : grid.gamma_factor;
    const bool factor = !grid.gamma_factor.empty();
    if (gammas.empty()) {
      if (cfg.gamma.certified()) throw ConfigError("sweep: gamma \"certified\" needs a gamma grid");
      gammas = {*cfg.gamma.value};
    }
    if (cfg.graph_scale.certified() && grid.scale.empty()) {
      throw ConfigError("sweep: certified graph_scale is not supported; give a scale grid");
    }
    std::vector<Cell> cells;
    for (double a : alphas) {
      for (double sc : scales) {
        for (double g : gammas) cells.push_back({a, sc, g, factor});
      }
    }

    struct Row {
      double alpha = 0, scale = 0, gamma = 0;
      bool pm_ok = false, certified = false;
      std::string status = "skipped";
      int exit_code = kExitConfigError;
      double final_err = NAN, fitted = NAN, certified_rate = NAN, T = NAN;
      std::string error;
    };
    std::vector<Row> rows(cells.size());

    auto evaluate = [&](std::size_t idx) {
      const Cell& c = cells[idx];
      Row& row = rows[idx];
      row.alpha = c.alpha;
      row.scale = c.scale;
      try {
        RunConfig rc = cfg;
        rc.sweep.reset();
        rc.alpha = c.alpha;
        rc.graph_scale = Tunable{c.scale};
        double gamma = c.gamma_arg;
        if (c.gamma_is_factor) {
          RunConfig probe = rc;
          probe.gamma = Tunable{0.0};
          probe.horizon = Tunable{1.0};
          const Setup base = resolve(probe);
          const PMPair pm = build_pm(c.alpha, cfg.beta);  // throws below the boundary
          gamma = c.gamma_arg * gamma_max(pm, base.sd, base.constants).value;
        }
        rc.gamma = Tunable{gamma};
        row.gamma = gamma;
        // Certified horizon only where a certificate exists.
        bool certified_horizon = rc.horizon.certified();
        if (certified_horizon) rc.horizon = Tunable{grid.T_uncertified};
        rc.integrator.T = *rc.horizon.value;
        Setup s = resolve(rc);
        row.pm_ok = s.report.has_value();
        row.certified = s.report && s.report->feasible && gamma > 0.0;
        if (row.certified) {
          row.certified_rate = -s.report->decay_rate;
          if (certified_horizon) {
            rc.horizon = Tunable{};
            s = resolve(rc);
          }
        }
        row.T = s.integrator.T;
        const Outcome o = run(s);
        row.status = to_string(o.traj.status);
        row.exit_code = o.exit_code;
        row.final_err = o.final_err;
        if (s.report) {
          try {
            row.fitted = rate_estimate(o.traj, *s.report).fitted;
          } catch (const FitWindowError&) {
          }
        }
      } catch (const GainConditionError& e) {
        row.status = "infeasible";
        row.exit_code = kExitInfeasible;
        row.error = e.what();
      } catch (const Error& e) {
        row.status = "error";
        row.exit_code = kExitConfigError;
        row.error = e.what();
      }
    };

    int workers = grid.workers > 0 ? grid.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) evaluate(i);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream csv;
    csv << "alpha, beta, gamma, scale, pm_feasible, certified, T, status, exit_code, final_err, "
           "fitted_rate, certified_rate\n";
    int failures = 0;
    for (const auto& r : rows) {
      csv << fmt(r.alpha) << ", " << fmt(cfg.beta) << ", " << fmt(r.gamma) << ", "
          << fmt(r.scale) << ", " << (r.pm_ok ? 1 : 0) << ", " << (r.certified ? 1 : 0) << ", "
          << fmt(r.T) << ", " << r.status << ", " << r.exit_code << ", " << fmt(r.final_err)
          << ", " << fmt(r.fitted) << ", " << fmt(r.certified_rate) << "\n";
      if (r.certified && r.exit_code != kExitConverged) ++failures;
      if (!r.error.empty() && r.status == "error") err << "cell error: " << r.error << "\n";
    }
    const auto dir = output_dir(cfg.output_dir);
    write_text_file(dir / "sweep.csv", csv.str());
    out << cells.size() << " cells, " << failures << " certified cells failed to converge\n";
    out << "wrote " << (dir / "sweep.csv").string() << "\n";
    return failures ? kExitDiverged : kExitConverged;
  });
}

}  // namespace pdflow
