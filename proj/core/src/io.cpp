#include "pdflow/io.hpp"

#include "pdflow/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace pdflow {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!ok.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(where + " must be finite");
  return d;
}

Eigen::VectorXd vec(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = number(v[i], where);
  return out;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

std::vector<double> list(const json& v, const std::string& where) {
  const Eigen::VectorXd e = vec(v, where);
  return {e.data(), e.data() + e.size()};
}

Tunable tunable(const json& v, const std::string& where) {
  if (v.is_string()) {
    if (v.get<std::string>() != "certified") {
      throw ConfigError(where + " must be a number or \"certified\"");
    }
    return {};
  }
  return {number(v, where)};
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

// --- graphs -----------------------------------------------------------------

Digraph parse_graph(const std::string& text) {
  const json j = parse_json(text, "graph");
  reject_unknown(j, {"n", "edges"}, "graph");
  const int n = get_as<int>(j, "n", "graph");
  if (n < 2) throw ConfigError("graph.n must be >= 2");
  const json& edges = j.at("edges");
  if (!edges.is_array()) throw ConfigError("graph.edges must be an array");
  std::vector<Edge> list_edges;
  for (const auto& e : edges) {
    reject_unknown(e, {"from", "to", "weight"}, "graph.edges[]");
    const int from = get_as<int>(e, "from", "edge");
    const int to = get_as<int>(e, "to", "edge");
    const double w = e.contains("weight") ? number(e.at("weight"), "edge.weight") : 1.0;
    if (from < 1 || from > n || to < 1 || to > n) {
      throw ConfigError("edge endpoint out of range 1.." + std::to_string(n));
    }
    list_edges.push_back({from - 1, to - 1, w});
  }
  try {
    return Digraph::from_edges(n, list_edges);
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("graph: ") + e.what());
  }
}

Digraph read_graph(const std::filesystem::path& path) { return parse_graph(read_text_file(path)); }

std::string graph_to_json(const Digraph& g) {
  json j;
  j["n"] = g.size();
  j["edges"] = json::array();
  const auto& A = g.adjacency();
  for (int to = 0; to < g.size(); ++to) {
    for (int from = 0; from < g.size(); ++from) {
      if (A(to, from) != 0.0) {
        j["edges"].push_back({{"from", from + 1}, {"to", to + 1}, {"weight", A(to, from)}});
      }
    }
  }
  return j.dump(2) + "\n";
}

std::string graph_hash(const Digraph& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const int n = g.size();
  mix(&n, sizeof n);
  const auto& A = g.adjacency();
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    const double v = A.data()[i];
    mix(&v, sizeof v);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- problems ---------------------------------------------------------------

Problem parse_problem(const std::string& text) {
  const json j = parse_json(text, "problem");
  reject_unknown(j, {"schema", "m", "box_halfwidth", "agents"}, "problem");
  if (j.contains("schema") && j.at("schema") != kProblemSchema) {
    throw ConfigError(std::string("problem.schema must be \"") + kProblemSchema + "\"");
  }
  Problem p;
  p.m = get_as<int>(j, "m", "problem");
  if (p.m < 1) throw ConfigError("problem.m must be positive");
  if (j.contains("box_halfwidth")) p.box_halfwidth = number(j.at("box_halfwidth"), "box_halfwidth");
  const json& agents = j.at("agents");
  if (!agents.is_array() || agents.empty()) throw ConfigError("problem.agents must be non-empty");
  for (const auto& a : agents) {
    reject_unknown(a, {"H", "c", "exp_atoms", "sin_atoms"}, "problem.agents[]");
    LocalCost c;
    const Eigen::VectorXd h = vec(a.at("H"), "H");
    if (h.size() != static_cast<Eigen::Index>(p.m) * p.m) throw ConfigError("H must have m*m entries");
    c.H = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        h.data(), p.m, p.m);
    c.c = a.contains("c") ? vec(a.at("c"), "c") : Eigen::VectorXd::Zero(p.m);
    if (a.contains("exp_atoms")) {
      for (const auto& e : a.at("exp_atoms")) {
        reject_unknown(e, {"a", "e"}, "exp_atoms[]");
        c.exp_atoms.push_back({number(e.at("a"), "a"), vec(e.at("e"), "e")});
      }
    }
    if (a.contains("sin_atoms")) {
      for (const auto& s : a.at("sin_atoms")) {
        reject_unknown(s, {"b", "s"}, "sin_atoms[]");
        c.sin_atoms.push_back({number(s.at("b"), "b"), vec(s.at("s"), "s")});
      }
    }
    p.costs.push_back(std::move(c));
  }
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  return p;
}

Problem read_problem(const std::filesystem::path& path) {
  return parse_problem(read_text_file(path));
}

std::string problem_to_json(const Problem& p) {
  json j;
  j["schema"] = kProblemSchema;
  j["m"] = p.m;
  j["box_halfwidth"] = p.box_halfwidth;
  j["agents"] = json::array();
  for (const auto& c : p.costs) {
    json a;
    json h = json::array();
    for (int r = 0; r < c.H.rows(); ++r) {
      for (int k = 0; k < c.H.cols(); ++k) h.push_back(c.H(r, k));
    }
    a["H"] = h;
    a["c"] = vec_json(c.c);
    a["exp_atoms"] = json::array();
    for (const auto& e : c.exp_atoms) a["exp_atoms"].push_back({{"a", e.a}, {"e", vec_json(e.e)}});
    a["sin_atoms"] = json::array();
    for (const auto& s : c.sin_atoms) a["sin_atoms"].push_back({{"b", s.b}, {"s", vec_json(s.s)}});
    j["agents"].push_back(a);
  }
  return j.dump(2) + "\n";
}

// --- run configs ------------------------------------------------------------

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json j = parse_json(text, "config");
  reject_unknown(j,
                 {"schema", "problem", "graph", "graph_scale", "gains", "integrator", "seed",
                  "output_dir", "convergence_tol", "sweep"},
                 "config");
  if (!j.contains("schema") || j.at("schema") != kRunSchema) {
    throw ConfigError(std::string("config.schema must be \"") + kRunSchema + "\"");
  }
  RunConfig cfg;
  cfg.base_dir = base_dir;
  if (j.contains("problem")) cfg.problem = get_as<std::string>(j, "problem", "config");
  if (j.contains("graph")) cfg.graph = get_as<std::string>(j, "graph", "config");
  if (j.contains("graph_scale")) cfg.graph_scale = tunable(j.at("graph_scale"), "graph_scale");
  if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j, "seed", "config");
  if (j.contains("output_dir")) cfg.output_dir = get_as<std::string>(j, "output_dir", "config");
  if (j.contains("convergence_tol")) {
    cfg.convergence_tol = number(j.at("convergence_tol"), "convergence_tol");
  }

  if (j.contains("gains")) {
    const json& g = j.at("gains");
    reject_unknown(g, {"alpha", "beta", "gamma"}, "gains");
    if (g.contains("alpha")) cfg.alpha = number(g.at("alpha"), "gains.alpha");
    if (g.contains("beta")) cfg.beta = number(g.at("beta"), "gains.beta");
    if (g.contains("gamma")) cfg.gamma = tunable(g.at("gamma"), "gains.gamma");
  }

  if (j.contains("integrator")) {
    const json& in = j.at("integrator");
    reject_unknown(in,
                   {"method", "dt", "T", "record_stride", "adaptive", "rtol", "atol", "max_steps",
                    "stop_storage_below"},
                   "integrator");
    auto& ic = cfg.integrator;
    try {
      if (in.contains("method")) ic.method = method_from_string(in.at("method").get<std::string>());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    } catch (const json::exception& e) {
      throw ConfigError(std::string("integrator.method: ") + e.what());
    }
    if (in.contains("dt")) ic.dt = number(in.at("dt"), "integrator.dt");
    if (in.contains("T")) cfg.horizon = tunable(in.at("T"), "integrator.T");
    if (in.contains("record_stride")) ic.record_stride = get_as<int>(in, "record_stride", "integrator");
    if (in.contains("adaptive")) ic.adaptive = get_as<bool>(in, "adaptive", "integrator");
    if (in.contains("rtol")) ic.rtol = number(in.at("rtol"), "integrator.rtol");
    if (in.contains("atol")) ic.atol = number(in.at("atol"), "integrator.atol");
    if (in.contains("max_steps")) ic.max_steps = get_as<long>(in, "max_steps", "integrator");
    if (in.contains("stop_storage_below")) {
      ic.stop_storage_below = number(in.at("stop_storage_below"), "stop_storage_below");
    }
  }
  if (cfg.horizon.value) cfg.integrator.T = *cfg.horizon.value;

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, {"alpha", "gamma", "gamma_factor", "scale", "T_uncertified", "workers"},
                   "sweep");
    SweepGrid grid;
    if (s.contains("alpha")) grid.alpha = list(s.at("alpha"), "sweep.alpha");
    if (s.contains("gamma")) grid.gamma = list(s.at("gamma"), "sweep.gamma");
    if (s.contains("gamma_factor")) grid.gamma_factor = list(s.at("gamma_factor"), "sweep.gamma_factor");
    if (s.contains("scale")) grid.scale = list(s.at("scale"), "sweep.scale");
    if (s.contains("T_uncertified")) grid.T_uncertified = number(s.at("T_uncertified"), "T_uncertified");
    if (s.contains("workers")) grid.workers = get_as<int>(s, "workers", "sweep");
    if (!grid.gamma.empty() && !grid.gamma_factor.empty()) {
      throw ConfigError("sweep: give either gamma or gamma_factor, not both");
    }
    cfg.sweep = grid;
  }

  try {
    cfg.integrator.validate();
    Gains{cfg.alpha, cfg.beta, cfg.gamma.value.value_or(0.0)}.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.graph_scale.value && !(*cfg.graph_scale.value > 0.0)) {
    throw ConfigError("graph_scale must be positive");
  }
  if (!(cfg.convergence_tol > 0.0)) throw ConfigError("convergence_tol must be positive");
  return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.parent_path());
}

// --- trajectories -----------------------------------------------------------

std::string trajectory_csv_header(int agents, int m) {
  std::string h = "t";
  for (const char* v : {"x", "z"}) {
    for (int i = 1; i <= agents; ++i) {
      for (int k = 1; k <= m; ++k) {
        h += ", ";
        h += v;
        h += "_" + std::to_string(i) + "_" + std::to_string(k);
      }
    }
  }
  h += ", V, f_x, xLx, zLz, err_norm";
  return h;
}

namespace {

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int m) {
  const int agents = traj.size() ? static_cast<int>(traj.states[0].x.size() / m) : 0;
  os << trajectory_csv_header(agents, m) << "\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& s = traj.states[k];
    const auto& o = traj.observables[k];
    put(os, traj.times[k]);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      os << ", ";
      put(os, s.x(i));
    }
    for (Eigen::Index i = 0; i < s.z.size(); ++i) {
      os << ", ";
      put(os, s.z(i));
    }
    for (double v : {o.V, o.f_x, o.xLx, o.zLz, o.err_norm}) {
      os << ", ";
      put(os, v);
    }
    os << "\n";
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, int m) {
  std::ostringstream ss;
  write_trajectory_csv(ss, traj, m);
  write_text_file(path, ss.str());
}

CsvTrajectory read_trajectory_csv(const std::filesystem::path& path, int agents, int m) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trajectory file is empty");
  if (line != trajectory_csv_header(agents, m)) {
    throw ConfigError("trajectory header does not match N = " + std::to_string(agents) +
                      ", m = " + std::to_string(m));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(agents) * m;
  CsvTrajectory out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        // NaN storage for runs without weights prints as "nan"; stod handles
        // that, so anything left is a genuine parse error.
        throw ConfigError("trajectory line " + std::to_string(lineno) + ": bad number '" + cell +
                          "'");
      }
    }
    if (static_cast<Eigen::Index>(vals.size()) != 1 + 2 * n + 5) {
      throw ConfigError("trajectory line " + std::to_string(lineno) + " has wrong column count");
    }
    out.times.push_back(vals[0]);
    State s{Eigen::Map<const Eigen::VectorXd>(vals.data() + 1, n),
            Eigen::Map<const Eigen::VectorXd>(vals.data() + 1 + n, n)};
    out.states.push_back(std::move(s));
  }
  if (out.times.empty()) throw ConfigError("trajectory has no rows");
  return out;
}

// --- reports ----------------------------------------------------------------

namespace {

json integrator_json(const IntegratorConfig& ic) {
  json j{{"method", to_string(ic.method)},
         {"dt", ic.dt},
         {"T", ic.T},
         {"record_stride", ic.record_stride},
         {"adaptive", ic.adaptive},
         {"rtol", ic.rtol},
         {"atol", ic.atol}};
  if (ic.stop_storage_below) j["stop_storage_below"] = *ic.stop_storage_below;
  return j;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string metadata_to_json(const RunMetadata& md) {
  json j{{"seed", md.seed},
         {"gains", {{"alpha", md.gains.alpha}, {"beta", md.gains.beta}, {"gamma", md.gains.gamma}}},
         {"graph_hash", md.graph_hash},
         {"graph_scale", md.graph_scale},
         {"dt", md.integrator.dt},
         {"T", md.integrator.T},
         {"integrator", integrator_json(md.integrator)},
         {"status", md.status},
         {"final_err", finite_or_null(md.final_err)},
         {"steps", md.steps},
         {"exit_code", md.exit_code}};
  if (md.status == "diverged") j["blowup_time"] = md.blowup_time;
  return j.dump(2) + "\n";
}

std::string report_to_json(const CertificateReport& rep,
                           const std::optional<DissipationReport>& dissipation,
                           const std::optional<SectorReport>& sector,
                           const std::optional<RateEstimate>& rate) {
  json j;
  j["gains"] = {{"alpha", rep.gains.alpha}, {"beta", rep.gains.beta}, {"gamma", rep.gains.gamma}};
  j["p1"] = rep.pm.p1;
  j["p2"] = rep.pm.p2;
  j["lam_min_M"] = rep.pm.lam_min_M;
  j["lam_max_P"] = rep.lam_max_P;
  j["rho"] = rep.rho;
  j["rmin"] = rep.rmin;
  j["mu"] = rep.mu;
  j["mu_stacked"] = rep.mu_stacked;
  j["lbar"] = rep.lbar;
  j["gamma_max"] = rep.gamma_bound.value;
  j["gamma_max_branches"] = {{"dual", rep.gamma_bound.branch_dual},
                             {"primal", rep.gamma_bound.branch_primal},
                             {"binding", rep.gamma_bound.binding}};
  j["rho_required"] = rep.connectivity.threshold;
  j["rho_current"] = rep.connectivity.current;
  j["certified_scale"] = rep.connectivity.certified_scale;
  j["delta_choice"] = rep.delta_choice;
  j["delta_tilde"] = rep.coefficients.delta_tilde;
  j["decay_rate"] = rep.decay_rate;
  j["margins"] = json::object();
  for (const auto& [k, v] : rep.margins) j["margins"][k] = v;
  j["feasible"] = rep.feasible;
  if (dissipation) {
    j["dissipation"] = {{"max_violation", dissipation->max_violation},
                        {"max_relative_violation", dissipation->max_relative_violation},
                        {"evaluated", dissipation->evaluated}};
  }
  if (sector) {
    j["sector"] = {{"min_slack_sector", sector->min_slack_sector},
                   {"min_slack_growth", sector->min_slack_growth},
                   {"evaluated", sector->evaluated}};
  }
  if (rate) {
    j["rate"] = {{"fitted", rate->fitted},
                 {"certified", rate->certified},
                 {"r2", rate->fit.r2},
                 {"points", rate->fit.points}};
  }
  return j.dump(2) + "\n";
}

}  // namespace pdflow
