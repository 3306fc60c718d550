#pragma once

#include "pdflow/costs.hpp"
#include "pdflow/digraph.hpp"
#include "pdflow/dynamics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace pdflow {

/// Storage/supply matrices for gains (α, β) with the tie p1 = αp2 - β.
struct PMPair {
  double alpha = 0.0;
  double beta = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  Eigen::Matrix2d P;  ///< [[p1, p2], [p2, 1]]
  Eigen::Matrix2d M;  ///< [[αp1 - βp2, p1], [p1, p2]]
  double lam_min_M = 0.0;
  double lam_max_P_template = 0.0;

  StorageWeights weights() const { return {p1, p2}; }
};

/// p2 = α/2, p1 = α²/2 - β. Throws GainConditionError unless α² > 4β, and
/// also when P or M fail the eigenvalue check (> 1e-12).
PMPair build_pm(double alpha, double beta);

/// λ̄ of P ⊗ R ⊗ I_m, i.e. λ̄(template) · max r.
double lam_max_weighted_P(const PMPair& pm, const SpectralData& sd);

/// V = ½ η̃ᵀ (P ⊗ R ⊗ I_m) η̃.
double storage(const State& s, const State& eq, const PMPair& pm, const SpectralData& sd);

/// Q from the general block formula
///   [[(αp1-βp2)L̃, (αp2-β)LᵀR + p1RL], [(αp2-β)RL + p1LᵀR, p2L̃]]
/// (bold, m-stacked). Throws TieConstraintError when αp2 - β != p1.
Eigen::MatrixXd q_matrix(const Gains& g, const PMPair& pm, const SpectralData& sd, int m);

/// μ/N: modulus of the stacked cost on the consensus subspace with respect
/// to ‖1⊗v‖. This is what the sector bound and everything downstream use.
double stacked_modulus(const Constants& k, int agents);

/// Default δ = p1 μ' / (4 p2 l̄²).
double default_delta(const PMPair& pm, const Constants& k, int agents);

struct GammaBound {
  double value = 0.0;
  double branch_dual = 0.0;      ///< λρr̲ p1 μ' / (2 p2² l̄²)
  double branch_primal = 0.0;    ///< 4λρr̲ μ' / (p1 μ'² + 4 p1 (l̄μ' + 2l̄²))
  std::string binding;           ///< "dual" or "primal"
};

GammaBound gamma_max(const PMPair& pm, const SpectralData& sd, const Constants& k);

struct ConnectivityRequirement {
  double threshold = 0.0;        ///< required ρ·r̲ (strict)
  double threshold_dual = 0.0;
  double threshold_primal = 0.0;
  double current = 0.0;          ///< ρ·r̲ of the given graph
  /// Uniform scale making ρr̲ = threshold / 0.9, i.e. the same 10% margin used
  /// for gains. Below 1 when the graph already has room to spare.
  double certified_scale = 0.0;
};

ConnectivityRequirement required_connectivity(const Gains& g, const PMPair& pm,
                                              const SpectralData& sd, const Constants& k);

/// Coefficients of the assembled decay inequality
///   V̇ ≤ -c_ybar ‖ȳ‖² - c_yperp ‖ỹ⊥‖² - c_z ‖z̃⊥‖².
struct DecayCoefficients {
  double c_ybar = 0.0;
  double c_yperp = 0.0;
  double c_z = 0.0;
  double delta_tilde = 0.0;  ///< min(c_ybar/2, c_yperp/2, c_z)
};

DecayCoefficients decay_coefficients(const Gains& g, const PMPair& pm, const SpectralData& sd,
                                     const Constants& k);

constexpr double kStrictnessMargin = 0.9;

struct CertificateReport {
  Gains gains;
  PMPair pm;
  double rho = 0.0;
  double rmin = 0.0;
  double mu = 0.0;
  double mu_stacked = 0.0;
  double lbar = 0.0;
  GammaBound gamma_bound;
  ConnectivityRequirement connectivity;
  double delta_choice = 0.0;
  DecayCoefficients coefficients;
  double lam_max_P = 0.0;
  double decay_rate = 0.0;  ///< 2δ̃ / λ̄(P); V(t) ≤ V(0) exp(-decay_rate t)
  std::map<std::string, double> margins;
  bool feasible = false;

  /// Recomputes `feasible` from the margins.
  void refresh();
};

/// Full certificate for the given gains. Throws GainConditionError
/// when α² <= 4β.
CertificateReport certify(const Gains& g, const SpectralData& sd, const Constants& k, int agents);

struct DissipationReport {
  double max_violation = 0.0;           ///< max V̇ - RHS
  double max_relative_violation = 0.0;  ///< max (V̇ - RHS) / (1 + |RHS|)
  std::size_t worst_index = 0;
  std::size_t evaluated = 0;
};

/// Analytic V̇ = η̃ᵀ P F(η) against the dissipation right-hand side
///   -c‖ỹ⊥‖² - (c - p2γ/(2δ))‖z̃⊥‖² + p1γ⟨ỹ, Ru⟩ + (δp2γ/2)‖Ru‖²,
/// c = λ̲(M)ρr̲, u = -Δ(ỹ), at every recorded state.
DissipationReport check_dissipation(const Trajectory& traj, const PMPair& pm,
                                    const SpectralData& sd, const Gains& g, const Problem& p,
                                    double delta);

/// Both sides at a single state; exposed for tests.
std::pair<double, double> dissipation_sides(const FlowModel& model, const PMPair& pm,
                                            const State& s, const State& eq, double delta);

struct SectorReport {
  double min_slack_sector = 0.0;  ///< ⟨ỹ,RΔ⟩ - (μ'/2)‖ȳ‖² + (l̄ + 2l̄²/μ')‖ỹ⊥‖²
  double min_slack_growth = 0.0;  ///< 2l̄²(‖ȳ‖² + ‖ỹ⊥‖²) - ‖RΔ‖²
  std::size_t evaluated = 0;
};

struct SectorSlack {
  double sector = 0.0;
  double growth = 0.0;
};

SectorSlack sector_slack(const Problem& p, const SpectralData& sd, const Eigen::VectorXd& eq_x,
                         const Constants& k, const Eigen::VectorXd& y_tilde);

/// Samples ỹ with ỹ + eq_x in the box (per-sample seeds, order independent),
/// plus axis and consensus extremes. Negative slack is reported, not thrown.
SectorReport check_sector(const Problem& p, const SpectralData& sd, const Eigen::VectorXd& eq_x,
                          const Constants& k, int samples, std::uint64_t seed = 7,
                          int threads = 0);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least squares of log(y) on t. Requires >= 3 points with y > 0.
LinearFit log_linear_fit(const std::vector<double>& t, const std::vector<double>& y);

struct RateEstimate {
  double fitted = 0.0;     ///< slope of log V in the window (negative when decaying)
  double certified = 0.0;  ///< -2δ̃/λ̄(P)
  LinearFit fit;
};

constexpr double kFitWindowLow = 1e-10;
constexpr double kFitWindowHigh = 1e-2;

/// Fits log V over the records with V in [1e-10, 1e-2]. Throws
/// FitWindowError when fewer than three records fall in the window.
RateEstimate rate_estimate(const Trajectory& traj, const CertificateReport& report);

}  // namespace pdflow
