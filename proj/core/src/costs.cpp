#include "pdflow/costs.hpp"

#include "pdflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace pdflow {

double LocalCost::value(const Eigen::VectorXd& x) const {
  double v = 0.5 * x.dot(H * x) + c.dot(x);
  for (const auto& atom : exp_atoms) v += atom.a * std::exp(atom.e.dot(x));
  for (const auto& atom : sin_atoms) v += atom.b * std::sin(atom.s.dot(x));
  return v;
}

Eigen::MatrixXd LocalCost::hessian(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd h = H;
  for (const auto& atom : exp_atoms) {
    h += atom.a * std::exp(atom.e.dot(x)) * atom.e * atom.e.transpose();
  }
  for (const auto& atom : sin_atoms) {
    h -= atom.b * std::sin(atom.s.dot(x)) * atom.s * atom.s.transpose();
  }
  return h;
}

void LocalCost::validate() const {
  const Eigen::Index m = c.size();
  if (m < 1) throw ValidationError("cost has empty linear term");
  if (H.rows() != m || H.cols() != m) throw ValidationError("H must be m x m");
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + H.cwiseAbs().maxCoeff())) {
    throw ValidationError("H must be symmetric");
  }
  for (const auto& atom : exp_atoms) {
    if (atom.e.size() != m) throw ValidationError("exp atom direction has wrong dimension");
  }
  for (const auto& atom : sin_atoms) {
    if (atom.s.size() != m) throw ValidationError("sin atom direction has wrong dimension");
  }
}

void Problem::validate() const {
  if (costs.empty()) throw ValidationError("problem has no agents");
  if (m < 1) throw ValidationError("decision dimension must be positive");
  if (!(box_halfwidth > 0.0) || !std::isfinite(box_halfwidth)) {
    throw ValidationError("box half-width must be positive and finite");
  }
  for (const auto& cost : costs) {
    cost.validate();
    if (cost.dim() != m) throw ValidationError("cost dimension differs from problem dimension");
  }
}

Eigen::VectorXd grad_local(const LocalCost& cost, const Eigen::VectorXd& x) {
  Eigen::VectorXd g = cost.H * x + cost.c;
  for (const auto& atom : cost.exp_atoms) g += atom.a * std::exp(atom.e.dot(x)) * atom.e;
  for (const auto& atom : cost.sin_atoms) g += atom.b * std::cos(atom.s.dot(x)) * atom.s;
  return g;
}

Eigen::VectorXd scaled_grad(const LocalCost& cost, double r_i, const Eigen::VectorXd& x) {
  if (!(r_i > 0.0)) throw ValidationError("eigenvector weight r_i must be positive");
  return grad_local(cost, x) / r_i;
}

Eigen::VectorXd global_grad(const Problem& p, const Eigen::VectorXd& x) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p.m);
  for (const auto& cost : p.costs) g += grad_local(cost, x);
  return g;
}

double global_value(const Problem& p, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (const auto& cost : p.costs) v += cost.value(x);
  return v;
}

Eigen::MatrixXd global_hessian(const Problem& p, const Eigen::VectorXd& x) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p.m, p.m);
  for (const auto& cost : p.costs) h += cost.hessian(x);
  return h;
}

namespace {

// Groups atoms by identical direction and checks that each group's
// coefficients sum to zero.
template <typename Atom, typename Coef, typename Dir>
bool group_cancels(const std::vector<const Atom*>& atoms, Coef coef, Dir dir) {
  std::vector<bool> used(atoms.size(), false);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (used[i]) continue;
    double sum = 0.0;
    for (std::size_t j = i; j < atoms.size(); ++j) {
      if (!used[j] && dir(*atoms[j]) == dir(*atoms[i])) {
        used[j] = true;
        sum += coef(*atoms[j]);
      }
    }
    if (std::abs(sum) > 1e-12) return false;
  }
  return true;
}

double min_eigenvalue(const Eigen::MatrixXd& h) {
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

bool atoms_cancel(const Problem& p) {
  std::vector<const ExpAtom*> exps;
  std::vector<const SinAtom*> sins;
  for (const auto& cost : p.costs) {
    for (const auto& a : cost.exp_atoms) exps.push_back(&a);
    for (const auto& a : cost.sin_atoms) sins.push_back(&a);
  }
  return group_cancels(
             exps, [](const ExpAtom& a) { return a.a; },
             [](const ExpAtom& a) -> const Eigen::VectorXd& { return a.e; }) &&
         group_cancels(
             sins, [](const SinAtom& a) { return a.b; },
             [](const SinAtom& a) -> const Eigen::VectorXd& { return a.s; });
}

ConvexityEstimate strong_convexity_mu(const Problem& p, int samples, std::uint64_t seed) {
  p.validate();
  ConvexityEstimate est;
  if (atoms_cancel(p)) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p.m, p.m);
    for (const auto& cost : p.costs) sum += cost.H;
    est.mu = min_eigenvalue(sum);
    est.exact = true;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-p.box_halfwidth, p.box_halfwidth);
    double mu = min_eigenvalue(global_hessian(p, Eigen::VectorXd::Zero(p.m)));
    for (int s = 0; s < samples; ++s) {
      Eigen::VectorXd x(p.m);
      for (int k = 0; k < p.m; ++k) x(k) = unif(rng);
      mu = std::min(mu, min_eigenvalue(global_hessian(p, x)));
    }
    est.mu = mu;
    est.exact = false;
    est.samples = samples + 1;
  }
  if (!(est.mu > 1e-12)) {
    throw NonConvexError("global cost is not strongly convex (mu = " + std::to_string(est.mu) +
                         ")");
  }
  return est;
}

double lipschitz_bound(const LocalCost& cost, double box_halfwidth) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cost.H);
  double l = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  for (const auto& atom : cost.exp_atoms) {
    const double peak = box_halfwidth * atom.e.lpNorm<1>();
    l += std::abs(atom.a) * atom.e.squaredNorm() * std::exp(peak);
  }
  for (const auto& atom : cost.sin_atoms) l += std::abs(atom.b) * atom.s.squaredNorm();
  return l;
}

Constants certify_constants(const Problem& p) {
  const ConvexityEstimate conv = strong_convexity_mu(p);
  Constants k;
  k.mu = conv.mu;
  k.mu_exact = conv.exact;
  k.mu_samples = conv.samples;
  k.l.resize(p.agents());
  for (int i = 0; i < p.agents(); ++i) {
    k.l(i) = lipschitz_bound(p.costs[i], p.box_halfwidth);
  }
  k.lbar = k.l.maxCoeff();
  return k;
}

Eigen::VectorXd solve_centralized(const Problem& p, int max_iterations) {
  p.validate();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.m);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd g = global_grad(p, x);
    const double gnorm = g.norm();
    if (gnorm <= 1e-10) return x;

    const Eigen::MatrixXd h = global_hessian(p, x);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    Eigen::VectorXd dir = llt.info() == Eigen::Success ? Eigen::VectorXd(llt.solve(-g))
                                                       : Eigen::VectorXd(-g);
    const double f0 = global_value(p, x);
    double t = 1.0;
    Eigen::VectorXd next = x + dir;
    for (int halvings = 0; halvings < 60; ++halvings) {
      next = x + t * dir;
      if (global_value(p, next) < f0 || global_grad(p, next).norm() < gnorm) break;
      t *= 0.5;
    }
    x = next;
  }
  if (global_grad(p, x).norm() <= 1e-10) return x;
  throw IterationLimitError("Newton iteration did not reach |grad| <= 1e-10 in " +
                            std::to_string(max_iterations) + " steps");
}

Eigen::VectorXd stacked_scaled_grad(const Problem& p, const Eigen::VectorXd& r,
                                    const Eigen::VectorXd& x) {
  const int m = p.m;
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < p.agents(); ++i) {
    g.segment(i * m, m) = scaled_grad(p.costs[i], r(i), x.segment(i * m, m));
  }
  return g;
}

double stacked_value(const Problem& p, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (int i = 0; i < p.agents(); ++i) v += p.costs[i].value(x.segment(i * p.m, p.m));
  return v;
}

std::pair<double, double> kkt_residual(const Problem& p, const SpectralData& sd, double gamma,
                                       const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
  const Eigen::Index n = static_cast<Eigen::Index>(p.agents()) * p.m;
  if (sd.size() != p.agents() || x.size() != n || z.size() != n) {
    throw ValidationError("kkt_residual: inconsistent dimensions");
  }
  const StackedLaplacian lap(sd.L, p.m);
  const Eigen::VectorXd stationarity = gamma * stacked_scaled_grad(p, sd.r, x) + lap.apply(z);
  return {stationarity.norm(), lap.apply(x).norm()};
}

}  // namespace pdflow
