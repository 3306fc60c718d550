#pragma once

#include "pdflow/costs.hpp"
#include "pdflow/digraph.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace pdflow {

/// Gains of the primal-dual flow
///   ẋ = -γ∇f̄(x) - Lz - αLx,   ż = βLx.
struct Gains {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.0;

  /// alpha > 0, beta > 0, gamma >= 0, all finite.
  void validate() const;
};

/// Primal and dual stacks, each of length N·m.
struct State {
  Eigen::VectorXd x;
  Eigen::VectorXd z;

  Eigen::VectorXd packed() const;
  static State unpack(const Eigen::VectorXd& eta);
};

/// Weights (p1, p2) of the storage V = ½ η̃ᵀ ([[p1, p2], [p2, 1]] ⊗ R ⊗ I_m) η̃.
struct StorageWeights {
  double p1 = 0.0;
  double p2 = 0.0;
};

/// Evaluates the storage for an error pair (x̃, z̃).
double storage_form(const StorageWeights& w, const Eigen::VectorXd& r, int m,
                    const Eigen::VectorXd& x_err, const Eigen::VectorXd& z_err);

/// Per-record quantities the figures plot.
struct Observables {
  double f_x = 0.0;       ///< Σ f_i(x_i)
  double xLx = 0.0;       ///< xᵀ(L⊗I)x (indefinite on unbalanced graphs)
  double zLz = 0.0;
  double V = 0.0;         ///< NaN when no storage weights were supplied
  double err_norm = 0.0;  ///< ‖x - x_eq‖
  double state_inf = 0.0; ///< max |x_ik|, for box membership checks
  Eigen::VectorXd z_avg;  ///< (rᵀ ⊗ I_m) z, conserved
};

enum class Method { Rk4, Dopri45, Sdirk3 };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct IntegratorConfig {
  Method method = Method::Rk4;
  double dt = 1e-3;        ///< fixed step, or initial step for adaptive runs
  double T = 20.0;
  int record_stride = 1;   ///< record every k-th accepted step (plus t = 0 and t = T)
  bool adaptive = true;    ///< only consulted for Sdirk3; Dopri45 is always adaptive
  double rtol = 1e-8;
  double atol = 1e-14;
  long max_steps = 50'000'000;
  /// Stop once V drops below this value (requires storage weights).
  std::optional<double> stop_storage_below;

  void validate() const;
};

enum class RunStatus { Completed, StoppedOnStorage, Diverged };

std::string to_string(RunStatus s);

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<Observables> observables;
  State equilibrium;
  RunStatus status = RunStatus::Completed;
  double blowup_time = 0.0;  ///< set when status == Diverged
  long steps = 0;
  long rejected = 0;

  std::size_t size() const { return times.size(); }
  const State& final_state() const { return states.back(); }
  const Observables& final_observables() const { return observables.back(); }
};

/// Right-hand side of the flow, with the Laplacian applied blockwise.
class FlowModel {
 public:
  FlowModel(const Problem& p, const SpectralData& sd, const Gains& g);

  int agents() const { return problem_->agents(); }
  int dim() const { return problem_->m; }
  Eigen::Index stack_size() const { return static_cast<Eigen::Index>(agents()) * dim(); }

  const Problem& problem() const { return *problem_; }
  const SpectralData& spectral() const { return *sd_; }
  const Gains& gains() const { return gains_; }
  const StackedLaplacian& laplacian() const { return lap_; }

  /// Packed η = (x, z) -> η̇.
  void rhs(const Eigen::VectorXd& eta, Eigen::VectorXd& deta) const;

  /// blockdiag(∇²f_i(x_i) / r_i)
  Eigen::MatrixXd scaled_hessian(const Eigen::VectorXd& x) const;

  /// One step of the 3-stage, order-3, L-stable, stiffly accurate SDIRK.
  /// The z stages are eliminated exactly (Z = Z_known + hλβ L X), so the
  /// r-weighted dual average is conserved to rounding. Returns false when
  /// the Newton iteration fails to converge.
  bool sdirk_step(const Eigen::VectorXd& eta, double h, Eigen::VectorXd& eta_next) const;

 private:
  void factor_stage(const Eigen::VectorXd& X, double hl,
                    Eigen::PartialPivLU<Eigen::MatrixXd>& lu) const;
  bool solve_stage(const Eigen::VectorXd& x_known, const Eigen::VectorXd& z_known, double hl,
                   Eigen::PartialPivLU<Eigen::MatrixXd>& lu, Eigen::VectorXd& X,
                   Eigen::VectorXd& Z) const;

  const Problem* problem_;
  const SpectralData* sd_;
  Gains gains_;
  StackedLaplacian lap_;
  Eigen::MatrixXd lap_dense_;
};

/// (-γ∇f̄(x) - Lz - αLx, βLx)
State vector_field(const State& s, const Gains& g, const SpectralData& sd, const Problem& p);

/// [[-αL, -L], [βL, 0]] with L = L_G ⊗ I_m, size 2Nm.
Eigen::MatrixXd linear_block(const Gains& g, const SpectralData& sd, int m);

/// Δ(ỹ) = ∇f̄(ỹ + y*) - ∇f̄(y*)
Eigen::VectorXd delta_map(const Problem& p, const SpectralData& sd, const Eigen::VectorXd& y_star,
                          const Eigen::VectorXd& y_tilde);

struct Projectors {
  Eigen::MatrixXd Pi;       ///< (1 rᵀ) ⊗ I_m
  Eigen::MatrixXd Pi_perp;  ///< I - Π
};

Projectors projectors(const SpectralData& sd, int m);

/// Π⊥ v computed blockwise.
Eigen::VectorXd disagreement(const Eigen::VectorXd& r, const Eigen::VectorXd& v, int m);

/// Equilibrium the flow converges to from s0.
///
/// For γ > 0 this is (1⊗x*, z*) with x* the centralized optimum and z* the
/// unique solution of Lz* = -γ∇f̄(1⊗x*) with (rᵀ⊗I)z* = (rᵀ⊗I)z(0). For γ = 0
/// the r-weighted averages of x and z are both conserved, so the equilibrium
/// is the consensus point they pin.
State reachable_equilibrium(const Problem& p, const SpectralData& sd, const Gains& g,
                            const State& s0);

/// Dual equilibrium for a given primal consensus stack and conserved average.
Eigen::VectorXd dual_equilibrium(const Problem& p, const SpectralData& sd, double gamma,
                                 const Eigen::VectorXd& x_star_stack,
                                 const Eigen::VectorXd& z_average);

Observables observe(const FlowModel& model, const State& s, const State& eq,
                    const std::optional<StorageWeights>& weights);

/// x(0) uniform in the box, z(0) = 0.
State random_initial_state(const Problem& p, std::uint64_t seed);

/// Integrates the flow. Divergence (non-finite state or ‖η‖∞ > 1e9) is
/// reported through Trajectory::status, not thrown.
Trajectory integrate(const Problem& p, const SpectralData& sd, const Gains& g, const State& s0,
                     const IntegratorConfig& cfg,
                     const std::optional<StorageWeights>& weights = std::nullopt);

}  // namespace pdflow
