#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace pdflow {

/// Directed edge: `to` receives information from `from` (a[to][from] = weight).
/// Node indices are zero-based.
struct Edge {
  int from = 0;
  int to = 0;
  double weight = 1.0;
};

/// Weighted digraph stored as its adjacency matrix.
///
/// Entry (i, j) is the weight of the edge from j into i. The constructor
/// rejects negative entries, non-finite entries, self-loops and n < 2.
class Digraph {
 public:
  explicit Digraph(Eigen::MatrixXd adjacency);

  static Digraph from_edges(int n, std::span<const Edge> edges);

  int size() const { return static_cast<int>(adjacency_.rows()); }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }

  /// 1ᵀL = 0, i.e. every node's in-weight equals its out-weight.
  bool weight_balanced(double tol = 1e-12) const;

 private:
  Eigen::MatrixXd adjacency_;
};

/// Spectral quantities of a strongly connected digraph.
struct SpectralData {
  Eigen::MatrixXd L;       ///< Laplacian D - A
  Eigen::VectorXd r;       ///< positive left null vector, entries sum to 1
  Eigen::MatrixXd Ltilde;  ///< R L + Lᵀ R
  double rho = 0.0;        ///< generalized algebraic connectivity
  double rmin = 0.0;       ///< smallest entry of r

  int size() const { return static_cast<int>(r.size()); }
  Eigen::MatrixXd R() const { return r.asDiagonal(); }
};

Eigen::MatrixXd laplacian(const Digraph& g);

bool strongly_connected(const Digraph& g);

/// Positive left eigenvector of a Laplacian for the zero eigenvalue,
/// normalized to sum one. Throws RankError if the numerical null space of
/// Lᵀ is not one-dimensional or the null vector has mixed signs.
Eigen::VectorXd left_eigenvector(const Eigen::MatrixXd& L);

/// min over rᵀx = 0, x != 0 of xᵀ(RL + LᵀR)x / (2 xᵀRx).
double generalized_connectivity(const Eigen::MatrixXd& L, const Eigen::VectorXd& r);

/// Orthonormal basis (n x n-1) of {x : rᵀx = 0}, from the Householder
/// reflector that maps r/|r| onto the first axis.
Eigen::MatrixXd orthogonal_complement_basis(const Eigen::VectorXd& r);

Digraph scale(const Digraph& g, double s);

/// Action of L ⊗ I_m on stacked vectors [x_1; ...; x_N] without forming the
/// Kronecker product. Row i is evaluated as Σ_j a_ij (x_i - x_j), so rounding
/// scales with the disagreement rather than with ‖L‖‖x‖.
class StackedLaplacian {
 public:
  StackedLaplacian(const Eigen::MatrixXd& L, int m);

  int agents() const { return agents_; }
  int dim() const { return dim_; }

  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  /// L ⊗ I_m as a dense matrix.
  Eigen::MatrixXd dense() const;

 private:
  struct Link {
    int to;
    int from;
    double weight;
  };
  int agents_;
  int dim_;
  std::vector<Link> links_;
};

/// (rᵀ ⊗ I_m) x: the r-weighted average of the agents' blocks.
Eigen::VectorXd weighted_average(const Eigen::VectorXd& r, const Eigen::VectorXd& x, int m);

/// 1_N ⊗ v
Eigen::VectorXd replicate(const Eigen::VectorXd& v, int agents);

/// Everything the certificates need. Throws ValidationError when the graph
/// is not strongly connected.
SpectralData spectral_data(const Digraph& g);

}  // namespace pdflow
