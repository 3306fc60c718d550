#include "pdflow/certificates.hpp"

#include "pdflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace pdflow {

PMPair build_pm(double alpha, double beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !(alpha > 0.0) || !(beta > 0.0)) {
    throw ValidationError("alpha and beta must be positive and finite");
  }
  if (!(alpha * alpha > 4.0 * beta)) {
    throw GainConditionError("alpha^2 <= 4 beta (alpha = " + std::to_string(alpha) +
                             ", beta = " + std::to_string(beta) + ")");
  }
  PMPair pm;
  pm.alpha = alpha;
  pm.beta = beta;
  pm.p2 = alpha / 2.0;
  pm.p1 = alpha * pm.p2 - beta;
  pm.P << pm.p1, pm.p2, pm.p2, 1.0;
  pm.M << alpha * pm.p1 - beta * pm.p2, pm.p1, pm.p1, pm.p2;

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ep(pm.P, Eigen::EigenvaluesOnly);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> em(pm.M, Eigen::EigenvaluesOnly);
  // Just above α² = 4β, λ_min(P) ~ (α² - 4β)/8, still far above 1e-12 at
  // the boundary sweep's 1e-6 offsets.
  if (!(ep.eigenvalues()(0) > 1e-12) || !(em.eigenvalues()(0) > 1e-12)) {
    throw GainConditionError("P or M is not positive definite");
  }
  pm.lam_min_M = em.eigenvalues()(0);
  pm.lam_max_P_template = ep.eigenvalues()(1);
  return pm;
}

double lam_max_weighted_P(const PMPair& pm, const SpectralData& sd) {
  return pm.lam_max_P_template * sd.r.maxCoeff();
}

double storage(const State& s, const State& eq, const PMPair& pm, const SpectralData& sd) {
  const int m = static_cast<int>(s.x.size() / sd.size());
  return storage_form(pm.weights(), sd.r, m, s.x - eq.x, s.z - eq.z);
}

Eigen::MatrixXd q_matrix(const Gains& g, const PMPair& pm, const SpectralData& sd, int m) {
  const double tie = g.alpha * pm.p2 - g.beta;
  if (std::abs(tie - pm.p1) > 1e-12 * (1.0 + std::abs(pm.p1))) {
    throw TieConstraintError("alpha p2 - beta = " + std::to_string(tie) +
                             " differs from p1 = " + std::to_string(pm.p1));
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  auto kron = [&](const Eigen::MatrixXd& A) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(A.rows() * m, A.cols() * m);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      for (Eigen::Index j = 0; j < A.cols(); ++j) out.block(i * m, j * m, m, m) = A(i, j) * I;
    }
    return out;
  };
  const Eigen::MatrixXd RL = kron(sd.R() * sd.L);
  const Eigen::MatrixXd LtR = kron(sd.L.transpose() * sd.R());
  const Eigen::Index n = RL.rows();
  Eigen::MatrixXd Q(2 * n, 2 * n);
  Q.topLeftCorner(n, n) = (g.alpha * pm.p1 - g.beta * pm.p2) * (LtR + RL);
  Q.topRightCorner(n, n) = tie * LtR + pm.p1 * RL;
  Q.bottomLeftCorner(n, n) = tie * RL + pm.p1 * LtR;
  Q.bottomRightCorner(n, n) = pm.p2 * (LtR + RL);
  return Q;
}

double stacked_modulus(const Constants& k, int agents) {
  if (agents < 1) throw ValidationError("agent count must be positive");
  return k.mu / agents;
}

double default_delta(const PMPair& pm, const Constants& k, int agents) {
  const double mu = stacked_modulus(k, agents);
  return pm.p1 * mu / (4.0 * pm.p2 * k.lbar * k.lbar);
}

GammaBound gamma_max(const PMPair& pm, const SpectralData& sd, const Constants& k) {
  const double mu = stacked_modulus(k, sd.size());
  const double l = k.lbar;
  const double lrr = pm.lam_min_M * sd.rho * sd.rmin;
  GammaBound b;
  b.branch_dual = lrr * pm.p1 * mu / (2.0 * pm.p2 * pm.p2 * l * l);
  b.branch_primal = 4.0 * lrr * mu / (pm.p1 * mu * mu + 4.0 * pm.p1 * (l * mu + 2.0 * l * l));
  b.value = std::min(b.branch_dual, b.branch_primal);
  b.binding = b.branch_dual <= b.branch_primal ? "dual" : "primal";
  return b;
}

ConnectivityRequirement required_connectivity(const Gains& g, const PMPair& pm,
                                              const SpectralData& sd, const Constants& k) {
  const double mu = stacked_modulus(k, sd.size());
  const double l = k.lbar;
  const double lam = pm.lam_min_M;
  ConnectivityRequirement c;
  c.threshold_dual = 2.0 * pm.p2 * pm.p2 * g.gamma * l * l / (pm.p1 * mu * lam);
  c.threshold_primal = (pm.p1 * g.gamma / lam) * (mu / 4.0 + (l * mu + 2.0 * l * l) / mu);
  c.threshold = std::max(c.threshold_dual, c.threshold_primal);
  c.current = sd.rho * sd.rmin;
  c.certified_scale = c.threshold / c.current / kStrictnessMargin;
  return c;
}

DecayCoefficients decay_coefficients(const Gains& g, const PMPair& pm, const SpectralData& sd,
                                     const Constants& k) {
  const double mu = stacked_modulus(k, sd.size());
  const double l = k.lbar;
  const double c = pm.lam_min_M * sd.rho * sd.rmin;
  DecayCoefficients d;
  d.c_ybar = pm.p1 * g.gamma * mu / 4.0;
  d.c_yperp = c - pm.p1 * g.gamma * mu / 4.0 - pm.p1 * g.gamma * (l + 2.0 * l * l / mu);
  d.c_z = c - 2.0 * pm.p2 * pm.p2 * g.gamma * l * l / (pm.p1 * mu);
  d.delta_tilde = std::min({d.c_ybar / 2.0, d.c_yperp / 2.0, d.c_z});
  return d;
}

void CertificateReport::refresh() {
  feasible = std::all_of(margins.begin(), margins.end(),
                         [](const auto& kv) { return kv.second >= 0.0; });
}

CertificateReport certify(const Gains& g, const SpectralData& sd, const Constants& k, int agents) {
  g.validate();
  if (agents != sd.size()) throw ValidationError("graph size differs from agent count");
  CertificateReport rep;
  rep.gains = g;
  rep.pm = build_pm(g.alpha, g.beta);
  rep.rho = sd.rho;
  rep.rmin = sd.rmin;
  rep.mu = k.mu;
  rep.mu_stacked = stacked_modulus(k, agents);
  rep.lbar = k.lbar;
  rep.gamma_bound = gamma_max(rep.pm, sd, k);
  rep.connectivity = required_connectivity(g, rep.pm, sd, k);
  rep.delta_choice = default_delta(rep.pm, k, agents);
  rep.coefficients = decay_coefficients(g, rep.pm, sd, k);
  rep.lam_max_P = lam_max_weighted_P(rep.pm, sd);
  rep.decay_rate = 2.0 * std::max(rep.coefficients.delta_tilde, 0.0) / rep.lam_max_P;

  rep.margins["c_ybar"] = rep.coefficients.c_ybar;
  rep.margins["c_yperp"] = rep.coefficients.c_yperp;
  rep.margins["c_z"] = rep.coefficients.c_z;
  rep.margins["connectivity"] = rep.connectivity.current - rep.connectivity.threshold;
  rep.refresh();
  return rep;
}

// ---------------------------------------------------------------------------

std::pair<double, double> dissipation_sides(const FlowModel& model, const PMPair& pm,
                                            const State& s, const State& eq, double delta) {
  const Problem& p = model.problem();
  const SpectralData& sd = model.spectral();
  const Gains& g = model.gains();
  const int m = p.m;

  const Eigen::VectorXd xt = s.x - eq.x;
  const Eigen::VectorXd zt = s.z - eq.z;
  Eigen::VectorXd F;
  model.rhs(s.packed(), F);
  const Eigen::Index n = xt.size();
  const auto Fx = F.head(n);
  const auto Fz = F.tail(n);

  // η̃ᵀ P F with P = template ⊗ R ⊗ I.
  double vdot = 0.0;
  for (int i = 0; i < sd.size(); ++i) {
    const auto xs = xt.segment(i * m, m);
    const auto zs = zt.segment(i * m, m);
    const auto fx = Fx.segment(i * m, m);
    const auto fz = Fz.segment(i * m, m);
    vdot += sd.r(i) * (pm.p1 * xs.dot(fx) + pm.p2 * (xs.dot(fz) + zs.dot(fx)) + zs.dot(fz));
  }

  const double c = pm.lam_min_M * sd.rho * sd.rmin;
  const Eigen::VectorXd y_perp = disagreement(sd.r, xt, m);
  const Eigen::VectorXd z_perp = disagreement(sd.r, zt, m);
  double rhs = -c * y_perp.squaredNorm();
  if (g.gamma == 0.0) {
    rhs -= c * z_perp.squaredNorm();
  } else {
    // R u = -R Δ(ỹ) = -(∇f(x) - ∇f(x*)), unscaled stacked gradients.
    Eigen::VectorXd Ru(n);
    for (int i = 0; i < sd.size(); ++i) {
      Ru.segment(i * m, m) = -(grad_local(p.costs[i], s.x.segment(i * m, m)) -
                               grad_local(p.costs[i], eq.x.segment(i * m, m)));
    }
    rhs -= (c - pm.p2 * g.gamma / (2.0 * delta)) * z_perp.squaredNorm();
    rhs += pm.p1 * g.gamma * xt.dot(Ru) + 0.5 * delta * pm.p2 * g.gamma * Ru.squaredNorm();
  }
  return {vdot, rhs};
}

DissipationReport check_dissipation(const Trajectory& traj, const PMPair& pm,
                                    const SpectralData& sd, const Gains& g, const Problem& p,
                                    double delta) {
  if (g.gamma > 0.0 && !(delta > 0.0)) throw ValidationError("delta must be positive");
  const FlowModel model(p, sd, g);
  DissipationReport rep;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  rep.max_relative_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto [vdot, rhs] = dissipation_sides(model, pm, traj.states[k], traj.equilibrium, delta);
    const double v = vdot - rhs;
    const double rel = v / (1.0 + std::abs(rhs));
    rep.max_violation = std::max(rep.max_violation, v);
    if (rel > rep.max_relative_violation) {
      rep.max_relative_violation = rel;
      rep.worst_index = k;
    }
    ++rep.evaluated;
  }
  return rep;
}

// ---------------------------------------------------------------------------

SectorSlack sector_slack(const Problem& p, const SpectralData& sd, const Eigen::VectorXd& eq_x,
                         const Constants& k, const Eigen::VectorXd& y_tilde) {
  const int m = p.m;
  const int N = p.agents();
  const double mu = stacked_modulus(k, N);
  const double l = k.lbar;

  Eigen::VectorXd RDelta(y_tilde.size());
  for (int i = 0; i < N; ++i) {
    RDelta.segment(i * m, m) =
        grad_local(p.costs[i], y_tilde.segment(i * m, m) + eq_x.segment(i * m, m)) -
        grad_local(p.costs[i], eq_x.segment(i * m, m));
  }
  const Eigen::VectorXd y_perp = disagreement(sd.r, y_tilde, m);
  const Eigen::VectorXd y_bar = y_tilde - y_perp;
  const double nb = y_bar.squaredNorm();
  const double np = y_perp.squaredNorm();

  SectorSlack s;
  s.sector = y_tilde.dot(RDelta) - (0.5 * mu * nb - (l + 2.0 * l * l / mu) * np);
  s.growth = 2.0 * l * l * (nb + np) - RDelta.squaredNorm();
  return s;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

SectorReport check_sector(const Problem& p, const SpectralData& sd, const Eigen::VectorXd& eq_x,
                          const Constants& k, int samples, std::uint64_t seed, int threads) {
  const int N = p.agents();
  const int m = p.m;
  const double B = p.box_halfwidth;
  const Eigen::Index n = static_cast<Eigen::Index>(N) * m;
  if (eq_x.size() != n) throw ValidationError("eq_x has wrong size");

  // Deterministic extremes: single-agent axis moves to the box faces and
  // consensus moves along each axis and along the weakest Hessian direction.
  // ỹ = 0 is left out: both slacks vanish there identically.
  std::vector<Eigen::VectorXd> fixed;
  auto clamp_to_box = [&](Eigen::VectorXd point) {
    for (Eigen::Index j = 0; j < n; ++j) point(j) = std::clamp(point(j), -B, B);
    return Eigen::VectorXd(point - eq_x);
  };
  for (int i = 0; i < N; ++i) {
    for (int c = 0; c < m; ++c) {
      for (double sgn : {-1.0, 1.0}) {
        Eigen::VectorXd point = eq_x;
        point(i * m + c) = sgn * B;
        fixed.push_back(clamp_to_box(point));
      }
    }
  }
  Eigen::MatrixXd hsum = Eigen::MatrixXd::Zero(m, m);
  for (const auto& cost : p.costs) hsum += cost.H;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (hsum + hsum.transpose()));
  std::vector<Eigen::VectorXd> dirs;
  for (int c = 0; c < m; ++c) dirs.push_back(Eigen::VectorXd::Unit(m, c));
  dirs.push_back(es.eigenvectors().col(0));
  for (const auto& d : dirs) {
    for (double sgn : {-1.0, 1.0}) {
      const Eigen::VectorXd v = sgn * B * d / d.lpNorm<Eigen::Infinity>();
      fixed.push_back(clamp_to_box(replicate(v, N)));
      fixed.push_back(clamp_to_box(eq_x + 1e-3 * replicate(v, N)));
    }
  }

  const std::size_t total = fixed.size() + static_cast<std::size_t>(std::max(samples, 0));
  std::vector<SectorSlack> slack(total);
  auto work = [&](std::size_t begin, std::size_t end) {
    std::uniform_real_distribution<double> unif(-B, B);
    for (std::size_t s = begin; s < end; ++s) {
      Eigen::VectorXd yt;
      if (s < fixed.size()) {
        yt = fixed[s];
      } else {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(s - fixed.size())));
        Eigen::VectorXd point(n);
        for (Eigen::Index j = 0; j < n; ++j) point(j) = unif(rng);
        yt = point - eq_x;
      }
      slack[s] = sector_slack(p, sd, eq_x, k, yt);
    }
  };

  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, 16);
  if (workers == 1 || total < 256) {
    work(0, total);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (total + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t b = std::min(total, w * chunk);
      const std::size_t e = std::min(total, b + chunk);
      pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }

  SectorReport rep;
  rep.min_slack_sector = std::numeric_limits<double>::infinity();
  rep.min_slack_growth = std::numeric_limits<double>::infinity();
  for (const auto& s : slack) {
    rep.min_slack_sector = std::min(rep.min_slack_sector, s.sector);
    rep.min_slack_growth = std::min(rep.min_slack_growth, s.growth);
  }
  rep.evaluated = total;
  return rep;
}

// ---------------------------------------------------------------------------

LinearFit log_linear_fit(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw ValidationError("fit: size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (y[i] > 0.0 && std::isfinite(y[i])) {
      xs.push_back(t[i]);
      ys.push_back(std::log(y[i]));
    }
  }
  if (xs.size() < 3) throw FitWindowError("fewer than three positive points to fit");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw FitWindowError("fit window has zero time extent");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  f.points = xs.size();
  return f;
}

RateEstimate rate_estimate(const Trajectory& traj, const CertificateReport& report) {
  std::vector<double> t, v;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double V = traj.observables[k].V;
    if (V >= kFitWindowLow && V <= kFitWindowHigh) {
      t.push_back(traj.times[k]);
      v.push_back(V);
    }
  }
  if (t.size() < 3) {
    throw FitWindowError("storage never entered [1e-10, 1e-2] on at least three records");
  }
  RateEstimate est;
  est.fit = log_linear_fit(t, v);
  est.fitted = est.fit.slope;
  est.certified = -report.decay_rate;
  return est;
}

}  // namespace pdflow
