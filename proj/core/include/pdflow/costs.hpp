#pragma once

#include "pdflow/digraph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

namespace pdflow {

/// a * exp(eᵀx)
struct ExpAtom {
  double a = 0.0;
  Eigen::VectorXd e;
};

/// b * sin(sᵀx)
struct SinAtom {
  double b = 0.0;
  Eigen::VectorXd s;
};

/// f(x) = ½ xᵀHx + cᵀx + Σ a_k exp(e_kᵀx) + Σ b_k sin(s_kᵀx)
///
/// The structured form lets Lipschitz and convexity constants be computed
/// instead of asserted. H must be symmetric.
struct LocalCost {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  std::vector<ExpAtom> exp_atoms;
  std::vector<SinAtom> sin_atoms;

  int dim() const { return static_cast<int>(c.size()); }
  double value(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

  /// Throws ValidationError on inconsistent dimensions or asymmetric H.
  void validate() const;
};

/// N agents sharing a decision in R^m, certified on [-B, B]^m.
struct Problem {
  int m = 0;
  std::vector<LocalCost> costs;
  double box_halfwidth = 5.0;

  int agents() const { return static_cast<int>(costs.size()); }
  void validate() const;
};

/// Constants consumed by the certificates.
struct Constants {
  double mu = 0.0;     ///< strong-convexity modulus of the global cost
  Eigen::VectorXd l;   ///< per-agent gradient Lipschitz bounds on the box
  double lbar = 0.0;   ///< max_i l_i
  bool mu_exact = true;
  int mu_samples = 0;  ///< box samples used when mu had to be estimated
};

struct ConvexityEstimate {
  double mu = 0.0;
  bool exact = true;  ///< false when the global Hessian is not constant
  int samples = 0;
};

Eigen::VectorXd grad_local(const LocalCost& cost, const Eigen::VectorXd& x);

/// ∇f_i(x) / r_i
Eigen::VectorXd scaled_grad(const LocalCost& cost, double r_i, const Eigen::VectorXd& x);

Eigen::VectorXd global_grad(const Problem& p, const Eigen::VectorXd& x);
double global_value(const Problem& p, const Eigen::VectorXd& x);
Eigen::MatrixXd global_hessian(const Problem& p, const Eigen::VectorXd& x);

/// True when every exp/sin atom is cancelled by atoms of other agents with
/// the same direction (coefficient sums within 1e-12), so the global Hessian
/// equals Σ H_i everywhere.
bool atoms_cancel(const Problem& p);

/// λ_min(Σ H_i) when the atoms cancel; otherwise the minimum of λ_min of the
/// global Hessian over `samples` box points (an estimate). Throws
/// NonConvexError when the result is <= 1e-12.
ConvexityEstimate strong_convexity_mu(const Problem& p, int samples = 4096,
                                      std::uint64_t seed = 0x5eedULL);

/// Certified upper bound on sup_box ‖∇²f‖₂ for box [-B, B]^m.
double lipschitz_bound(const LocalCost& cost, double box_halfwidth);

Constants certify_constants(const Problem& p);

/// Damped Newton on the global cost from the origin; ‖∇f̃(x*)‖ <= 1e-10.
Eigen::VectorXd solve_centralized(const Problem& p, int max_iterations = 200);

/// (‖γ∇f̄(x) + Lz‖, ‖Lx‖) for stacked x, z of length N·m.
std::pair<double, double> kkt_residual(const Problem& p, const SpectralData& sd, double gamma,
                                       const Eigen::VectorXd& x, const Eigen::VectorXd& z);

/// Stacked ∇f̄(x) = [∇f_i(x_i)/r_i]_i.
Eigen::VectorXd stacked_scaled_grad(const Problem& p, const Eigen::VectorXd& r,
                                    const Eigen::VectorXd& x);

/// Σ_i f_i(x_i) for stacked x.
double stacked_value(const Problem& p, const Eigen::VectorXd& x);

}  // namespace pdflow
