#include "pdflow/dynamics.hpp"

#include "pdflow/error.hpp"
#include "pdflow/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pdflow {

void Gains::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be positive");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("gamma must be >= 0");
}

Eigen::VectorXd State::packed() const {
  Eigen::VectorXd eta(x.size() + z.size());
  eta << x, z;
  return eta;
}

State State::unpack(const Eigen::VectorXd& eta) {
  const Eigen::Index n = eta.size() / 2;
  return State{eta.head(n), eta.tail(n)};
}

double storage_form(const StorageWeights& w, const Eigen::VectorXd& r, int m,
                    const Eigen::VectorXd& x_err, const Eigen::VectorXd& z_err) {
  double xx = 0.0, xz = 0.0, zz = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const auto xs = x_err.segment(i * m, m);
    const auto zs = z_err.segment(i * m, m);
    xx += r(i) * xs.squaredNorm();
    xz += r(i) * xs.dot(zs);
    zz += r(i) * zs.squaredNorm();
  }
  return 0.5 * (w.p1 * xx + 2.0 * w.p2 * xz + zz);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Rk4: return "rk4";
    case Method::Dopri45: return "dopri45";
    case Method::Sdirk3: return "sdirk3";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "rk4") return Method::Rk4;
  if (name == "dopri45") return Method::Dopri45;
  if (name == "sdirk3") return Method::Sdirk3;
  throw ValidationError("unknown integration method '" + name + "'");
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::StoppedOnStorage: return "stopped_on_storage";
    case RunStatus::Diverged: return "diverged";
  }
  return "unknown";
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("T must be positive");
  if (record_stride < 1) throw ValidationError("record_stride must be >= 1");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ValidationError("tolerances must be positive");
  if (max_steps < 1) throw ValidationError("max_steps must be positive");
}

// ---------------------------------------------------------------------------

FlowModel::FlowModel(const Problem& p, const SpectralData& sd, const Gains& g)
    : problem_(&p), sd_(&sd), gains_(g), lap_(sd.L, p.m) {
  p.validate();
  g.validate();
  if (sd.size() != p.agents()) {
    throw ValidationError("graph has " + std::to_string(sd.size()) + " nodes but problem has " +
                          std::to_string(p.agents()) + " agents");
  }
  lap_dense_ = lap_.dense();
}

void FlowModel::rhs(const Eigen::VectorXd& eta, Eigen::VectorXd& deta) const {
  const Eigen::Index n = stack_size();
  const auto x = eta.head(n);
  const auto z = eta.tail(n);
  deta.resize(2 * n);
  Eigen::VectorXd lx, lz;
  lap_.apply(x, lx);
  lap_.apply(z, lz);
  deta.head(n) = -gains_.alpha * lx - lz;
  if (gains_.gamma != 0.0) {
    deta.head(n) -= gains_.gamma * stacked_scaled_grad(*problem_, sd_->r, x);
  }
  deta.tail(n) = gains_.beta * lx;
}

Eigen::MatrixXd FlowModel::scaled_hessian(const Eigen::VectorXd& x) const {
  const int m = dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(stack_size(), stack_size());
  for (int i = 0; i < agents(); ++i) {
    h.block(i * m, i * m, m, m) = problem_->costs[i].hessian(x.segment(i * m, m)) / sd_->r(i);
  }
  return h;
}

namespace {

// Alexander (1977): L-stable, stiffly accurate, order 3.
const double kLambda = 0.43586652150845899941601945;
const double kTau = 0.5 * (1.0 + kLambda);
const double kB1 = -(6.0 * kLambda * kLambda - 16.0 * kLambda + 1.0) / 4.0;
const double kB2 = (6.0 * kLambda * kLambda - 20.0 * kLambda + 5.0) / 4.0;

constexpr int kNewtonMaxIterations = 16;

}  // namespace

void FlowModel::factor_stage(const Eigen::VectorXd& X, double hl,
                             Eigen::PartialPivLU<Eigen::MatrixXd>& lu) const {
  const Eigen::Index n = stack_size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  J.topLeftCorner(n, n) += hl * gains_.alpha * lap_dense_;
  if (gains_.gamma != 0.0) J.topLeftCorner(n, n) += hl * gains_.gamma * scaled_hessian(X);
  J.topRightCorner(n, n) = hl * lap_dense_;
  J.bottomLeftCorner(n, n) = -hl * gains_.beta * lap_dense_;
  lu.compute(J);
}

// Simplified Newton on X with the factorization shared across stages;
// refactors at the current iterate when contraction is poor.
bool FlowModel::solve_stage(const Eigen::VectorXd& x_known, const Eigen::VectorXd& z_known,
                            double hl, Eigen::PartialPivLU<Eigen::MatrixXd>& lu, Eigen::VectorXd& X,
                            Eigen::VectorXd& Z) const {
  const Eigen::Index n = stack_size();
  const double a = gains_.alpha, b = gains_.beta, g = gains_.gamma;

  Eigen::VectorXd rhs_vec = Eigen::VectorXd::Zero(2 * n);
  Eigen::VectorXd lx, lz;
  X = x_known;
  double prev = std::numeric_limits<double>::infinity();
  bool refreshed = false;
  bool converged = false;
  for (int it = 0; it < kNewtonMaxIterations; ++it) {
    lap_.apply(X, lx);
    Z = z_known + (hl * b) * lx;
    lap_.apply(Z, lz);
    Eigen::VectorXd G = X - x_known + hl * (a * lx + lz);
    if (g != 0.0) G += (hl * g) * stacked_scaled_grad(*problem_, sd_->r, X);

    rhs_vec.head(n) = -G;
    const Eigen::VectorXd d = lu.solve(rhs_vec);
    const Eigen::VectorXd dX = d.head(n);
    if (!dX.allFinite()) return false;
    X += dX;

    const double scale = X.lpNorm<Eigen::Infinity>();
    const double step = dX.lpNorm<Eigen::Infinity>();
    if (step <= 1e-14 * scale || step == 0.0) {
      converged = true;
      break;
    }
    // Stagnation at the rounding floor.
    if (step >= 0.5 * prev && step <= 1e-10 * scale) {
      converged = true;
      break;
    }
    if (step > 0.5 * prev && !refreshed) {
      factor_stage(X, hl, lu);
      refreshed = true;
    }
    prev = step;
  }
  if (!converged) return false;
  lap_.apply(X, lx);
  Z = z_known + (hl * b) * lx;
  return X.allFinite() && Z.allFinite();
}

bool FlowModel::sdirk_step(const Eigen::VectorXd& eta, double h, Eigen::VectorXd& eta_next) const {
  const Eigen::Index n = stack_size();
  const double hl = h * kLambda;
  const Eigen::VectorXd x0 = eta.head(n);
  const Eigen::VectorXd z0 = eta.tail(n);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  factor_stage(x0, hl, lu);
  Eigen::VectorXd X1, Z1, X2, Z2, X3, Z3;
  // Stage 1.
  if (!solve_stage(x0, z0, hl, lu, X1, Z1)) return false;
  const Eigen::VectorXd kx1 = (X1 - x0) / hl;
  const Eigen::VectorXd kz1 = gains_.beta * lap_.apply(X1);
  // Stage 2.
  const double a21 = kTau - kLambda;
  const Eigen::VectorXd xk2 = x0 + (h * a21) * kx1;
  const Eigen::VectorXd zk2 = z0 + (h * a21) * kz1;
  if (!solve_stage(xk2, zk2, hl, lu, X2, Z2)) return false;
  const Eigen::VectorXd kx2 = (X2 - xk2) / hl;
  const Eigen::VectorXd kz2 = gains_.beta * lap_.apply(X2);
  // Stage 3 (stiffly accurate: y_{n+1} = Y_3).
  const Eigen::VectorXd xk3 = x0 + h * (kB1 * kx1 + kB2 * kx2);
  const Eigen::VectorXd zk3 = z0 + h * (kB1 * kz1 + kB2 * kz2);
  if (!solve_stage(xk3, zk3, hl, lu, X3, Z3)) return false;

  eta_next.resize(2 * n);
  eta_next << X3, Z3;
  return true;
}

// ---------------------------------------------------------------------------

State vector_field(const State& s, const Gains& g, const SpectralData& sd, const Problem& p) {
  const FlowModel model(p, sd, g);
  if (s.x.size() != model.stack_size() || s.z.size() != model.stack_size()) {
    throw ValidationError("state dimension differs from N*m");
  }
  Eigen::VectorXd d;
  model.rhs(s.packed(), d);
  return State::unpack(d);
}

Eigen::MatrixXd linear_block(const Gains& g, const SpectralData& sd, int m) {
  const Eigen::MatrixXd K = StackedLaplacian(sd.L, m).dense();
  const Eigen::Index n = K.rows();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  A.topLeftCorner(n, n) = -g.alpha * K;
  A.topRightCorner(n, n) = -K;
  A.bottomLeftCorner(n, n) = g.beta * K;
  return A;
}

Eigen::VectorXd delta_map(const Problem& p, const SpectralData& sd, const Eigen::VectorXd& y_star,
                          const Eigen::VectorXd& y_tilde) {
  return stacked_scaled_grad(p, sd.r, y_tilde + y_star) - stacked_scaled_grad(p, sd.r, y_star);
}

Projectors projectors(const SpectralData& sd, int m) {
  const int N = sd.size();
  const Eigen::Index n = static_cast<Eigen::Index>(N) * m;
  Projectors out;
  out.Pi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      for (int k = 0; k < m; ++k) out.Pi(i * m + k, j * m + k) = sd.r(j);
    }
  }
  out.Pi_perp = Eigen::MatrixXd::Identity(n, n) - out.Pi;
  return out;
}

Eigen::VectorXd disagreement(const Eigen::VectorXd& r, const Eigen::VectorXd& v, int m) {
  return v - replicate(weighted_average(r, v, m), static_cast<int>(r.size()));
}

Eigen::VectorXd dual_equilibrium(const Problem& p, const SpectralData& sd, double gamma,
                                 const Eigen::VectorXd& x_star_stack,
                                 const Eigen::VectorXd& z_average) {
  const int N = p.agents();
  const int m = p.m;
  Eigen::MatrixXd A(N + 1, N);
  A.topRows(N) = sd.L;
  A.row(N) = sd.r.transpose();
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);

  const Eigen::VectorXd grad = gamma == 0.0 ? Eigen::VectorXd::Zero(x_star_stack.size())
                                            : stacked_scaled_grad(p, sd.r, x_star_stack);
  Eigen::VectorXd z(static_cast<Eigen::Index>(N) * m);
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd b(N + 1);
    for (int i = 0; i < N; ++i) b(i) = -gamma * grad(i * m + k);
    b(N) = z_average(k);
    const Eigen::VectorXd zk = qr.solve(b);
    for (int i = 0; i < N; ++i) z(i * m + k) = zk(i);
  }
  return z;
}

State reachable_equilibrium(const Problem& p, const SpectralData& sd, const Gains& g,
                            const State& s0) {
  const int N = p.agents();
  const Eigen::VectorXd z_avg = weighted_average(sd.r, s0.z, p.m);
  State eq;
  if (g.gamma > 0.0) {
    eq.x = replicate(solve_centralized(p), N);
    eq.z = dual_equilibrium(p, sd, g.gamma, eq.x, z_avg);
  } else {
    eq.x = replicate(weighted_average(sd.r, s0.x, p.m), N);
    eq.z = replicate(z_avg, N);
  }
  return eq;
}

Observables observe(const FlowModel& model, const State& s, const State& eq,
                    const std::optional<StorageWeights>& weights) {
  const Problem& p = model.problem();
  const auto& lap = model.laplacian();
  Observables o;
  o.f_x = stacked_value(p, s.x);
  o.xLx = s.x.dot(lap.apply(s.x));
  o.zLz = s.z.dot(lap.apply(s.z));
  o.V = weights ? storage_form(*weights, model.spectral().r, p.m, s.x - eq.x, s.z - eq.z)
                : std::numeric_limits<double>::quiet_NaN();
  o.err_norm = (s.x - eq.x).norm();
  o.state_inf = s.x.size() ? s.x.lpNorm<Eigen::Infinity>() : 0.0;
  o.z_avg = weighted_average(model.spectral().r, s.z, p.m);
  return o;
}

State random_initial_state(const Problem& p, std::uint64_t seed) {
  const Eigen::Index n = static_cast<Eigen::Index>(p.agents()) * p.m;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-p.box_halfwidth, p.box_halfwidth);
  State s{Eigen::VectorXd(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) s.x(i) = unif(rng);
  return s;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kDivergenceNorm = 1e9;

bool diverged(const Eigen::VectorXd& eta) {
  return !eta.allFinite() || eta.lpNorm<Eigen::Infinity>() > kDivergenceNorm;
}

class Recorder {
 public:
  Recorder(const FlowModel& model, const State& eq, const std::optional<StorageWeights>& w,
           Trajectory& out)
      : model_(model), eq_(eq), weights_(w), out_(out) {}

  void record(double t, const Eigen::VectorXd& eta) {
    State s = State::unpack(eta);
    out_.observables.push_back(observe(model_, s, eq_, weights_));
    out_.times.push_back(t);
    out_.states.push_back(std::move(s));
  }

  bool storage_below(const Eigen::VectorXd& eta, double threshold) const {
    if (!weights_) return false;
    const Eigen::Index n = eta.size() / 2;
    const double V = storage_form(*weights_, model_.spectral().r, model_.dim(),
                                  eta.head(n) - eq_.x, eta.tail(n) - eq_.z);
    return V < threshold;
  }

 private:
  const FlowModel& model_;
  const State& eq_;
  const std::optional<StorageWeights>& weights_;
  Trajectory& out_;
};

}  // namespace

Trajectory integrate(const Problem& p, const SpectralData& sd, const Gains& g, const State& s0,
                     const IntegratorConfig& cfg, const std::optional<StorageWeights>& weights) {
  cfg.validate();
  const FlowModel model(p, sd, g);
  const Eigen::Index n = model.stack_size();
  if (s0.x.size() != n || s0.z.size() != n) throw ValidationError("initial state has wrong size");
  if (!s0.x.allFinite() || !s0.z.allFinite()) throw ValidationError("initial state not finite");
  if (cfg.stop_storage_below && !weights) {
    throw ValidationError("stop_storage_below requires storage weights");
  }

  Trajectory traj;
  traj.equilibrium = reachable_equilibrium(p, sd, g, s0);
  Recorder rec(model, traj.equilibrium, weights, traj);

  const Rhs f = [&model](const Eigen::VectorXd& y, Eigen::VectorXd& dy) { model.rhs(y, dy); };
  Eigen::VectorXd eta = s0.packed();
  rec.record(0.0, eta);

  auto stop_on_storage = [&](double t, const Eigen::VectorXd& y) {
    if (cfg.stop_storage_below && rec.storage_below(y, *cfg.stop_storage_below)) {
      if (traj.times.back() != t) rec.record(t, y);
      traj.status = RunStatus::StoppedOnStorage;
      return true;
    }
    return false;
  };
  auto blow_up = [&](double t) {
    traj.status = RunStatus::Diverged;
    traj.blowup_time = t;
  };

  const bool fixed = cfg.method == Method::Rk4 || (cfg.method == Method::Sdirk3 && !cfg.adaptive);
  if (fixed) {
    const long nsteps = static_cast<long>(std::ceil(cfg.T / cfg.dt - 1e-9));
    if (nsteps > cfg.max_steps) throw ValidationError("T/dt exceeds max_steps");
    Rk4Stepper rk4(2 * n);
    Eigen::VectorXd next;
    for (long k = 1; k <= nsteps; ++k) {
      const double t_prev = static_cast<double>(k - 1) * cfg.dt;
      const double t = (k == nsteps) ? cfg.T : static_cast<double>(k) * cfg.dt;
      const double h = t - t_prev;
      if (cfg.method == Method::Rk4) {
        rk4.step(f, eta, h);
      } else {
        if (!model.sdirk_step(eta, h, next)) {
          blow_up(t);
          break;
        }
        eta.swap(next);
      }
      ++traj.steps;
      if (diverged(eta)) {
        blow_up(t);
        break;
      }
      if (stop_on_storage(t, eta)) break;
      if (k % cfg.record_stride == 0 || k == nsteps) rec.record(t, eta);
    }
    return traj;
  }

  // Adaptive stepping.
  double t = 0.0;
  double h = std::min(cfg.dt, cfg.T);
  Dopri45Stepper dopri(2 * n);
  Eigen::VectorXd y_new, err, y_big, y_mid;
  long accepted = 0;
  while (t < cfg.T) {
    if (traj.steps + traj.rejected >= cfg.max_steps) {
      throw IterationLimitError("adaptive integration exceeded max_steps");
    }
    const bool last = t + h >= cfg.T * (1.0 - 1e-15);
    if (last) h = cfg.T - t;
    const double h_min = 1e-13 * std::max(1.0, t);

    double err_norm = 0.0;
    constexpr double kOrderExponent3 = 1.0 / 4.0;
    constexpr double kOrderExponent5 = 1.0 / 5.0;
    double exponent = kOrderExponent5;
    bool ok = true;
    if (cfg.method == Method::Dopri45) {
      dopri.attempt(f, eta, h, y_new, err);
      err_norm = scaled_error_norm(err, eta, y_new, cfg.rtol, cfg.atol);
    } else {
      // Step doubling: one step of h against two of h/2; keep the latter.
      exponent = kOrderExponent3;
      ok = model.sdirk_step(eta, h, y_big) && model.sdirk_step(eta, 0.5 * h, y_mid) &&
           model.sdirk_step(y_mid, 0.5 * h, y_new);
      if (ok) {
        err = (y_new - y_big) / 7.0;
        err_norm = scaled_error_norm(err, eta, y_new, cfg.rtol, cfg.atol);
      }
    }
    if (!ok || !std::isfinite(err_norm)) {
      ++traj.rejected;
      h *= 0.25;
      if (h < h_min) {
        blow_up(t);
        break;
      }
      continue;
    }

    if (err_norm <= 1.0) {
      t = last ? cfg.T : t + h;
      eta.swap(y_new);
      if (cfg.method == Method::Dopri45) dopri.accept();
      ++traj.steps;
      ++accepted;
      if (diverged(eta)) {
        blow_up(t);
        break;
      }
      if (stop_on_storage(t, eta)) break;
      if (accepted % cfg.record_stride == 0 || t >= cfg.T) rec.record(t, eta);
      const double grow = err_norm > 0.0 ? 0.9 * std::pow(err_norm, -exponent) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      ++traj.rejected;
      h *= std::clamp(0.9 * std::pow(err_norm, -exponent), 0.1, 0.9);
      if (h < h_min) {
        blow_up(t);
        break;
      }
    }
  }
  return traj;
}

}  // namespace pdflow
