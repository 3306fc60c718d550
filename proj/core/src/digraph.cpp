#include "pdflow/digraph.hpp"

#include "pdflow/error.hpp"

#include <cmath>
#include <string>

namespace pdflow {

namespace {

// Nodes reachable from `start` following a(i, j) > 0 as j -> i (forward) or
// i -> j (reverse).
std::vector<bool> reachable(const Eigen::MatrixXd& a, int start, bool reverse) {
  const int n = static_cast<int>(a.rows());
  std::vector<bool> seen(n, false);
  std::vector<int> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < n; ++v) {
      const double w = reverse ? a(u, v) : a(v, u);
      if (w > 0.0 && !seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

}  // namespace

Digraph::Digraph(Eigen::MatrixXd adjacency) : adjacency_(std::move(adjacency)) {
  if (adjacency_.rows() != adjacency_.cols()) {
    throw ValidationError("adjacency matrix must be square");
  }
  if (adjacency_.rows() < 2) {
    throw ValidationError("digraph needs at least two nodes");
  }
  for (Eigen::Index i = 0; i < adjacency_.rows(); ++i) {
    for (Eigen::Index j = 0; j < adjacency_.cols(); ++j) {
      const double w = adjacency_(i, j);
      if (!std::isfinite(w) || w < 0.0) {
        throw ValidationError("edge weight a(" + std::to_string(i) + "," + std::to_string(j) +
                              ") must be finite and nonnegative");
      }
    }
    if (adjacency_(i, i) != 0.0) {
      throw ValidationError("self-loop on node " + std::to_string(i));
    }
  }
}

Digraph Digraph::from_edges(int n, std::span<const Edge> edges) {
  if (n < 2) throw ValidationError("digraph needs at least two nodes");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : edges) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n) {
      throw ValidationError("edge endpoint out of range");
    }
    if (e.from == e.to) throw ValidationError("self-loop on node " + std::to_string(e.from));
    a(e.to, e.from) += e.weight;
  }
  return Digraph(std::move(a));
}

bool Digraph::weight_balanced(double tol) const {
  const Eigen::VectorXd in = adjacency_.rowwise().sum();
  const Eigen::VectorXd out = adjacency_.colwise().sum().transpose();
  return (in - out).cwiseAbs().maxCoeff() <= tol;
}

Eigen::MatrixXd laplacian(const Digraph& g) {
  const Eigen::MatrixXd& a = g.adjacency();
  Eigen::MatrixXd L = -a;
  L.diagonal() = a.rowwise().sum();
  return L;
}

bool strongly_connected(const Digraph& g) {
  const auto fwd = reachable(g.adjacency(), 0, false);
  const auto bwd = reachable(g.adjacency(), 0, true);
  for (int i = 0; i < g.size(); ++i) {
    if (!fwd[i] || !bwd[i]) return false;
  }
  return true;
}

Eigen::VectorXd left_eigenvector(const Eigen::MatrixXd& L) {
  if (L.rows() != L.cols() || L.rows() < 2) {
    throw ValidationError("Laplacian must be square with n >= 2");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(L.transpose(), Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double norm = sv(0);
  if (norm == 0.0) throw RankError("Laplacian is identically zero");
  const double threshold = 1e-10 * norm;
  int nullity = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) < threshold) ++nullity;
  }
  if (nullity != 1) {
    throw RankError("null space of L^T has dimension " + std::to_string(nullity) +
                    " (graph not strongly connected?)");
  }
  Eigen::VectorXd r = svd.matrixV().col(sv.size() - 1);
  if (r.sum() < 0.0) r = -r;
  r /= r.sum();
  if (r.minCoeff() <= 0.0) {
    throw RankError("left null vector of L has mixed signs");
  }
  return r;
}

Eigen::MatrixXd orthogonal_complement_basis(const Eigen::VectorXd& r) {
  const Eigen::Index n = r.size();
  Eigen::VectorXd w = r.normalized();
  w(0) += (w(0) >= 0.0 ? 1.0 : -1.0);
  const Eigen::MatrixXd H =
      Eigen::MatrixXd::Identity(n, n) - 2.0 * w * w.transpose() / w.squaredNorm();
  return H.rightCols(n - 1);
}

double generalized_connectivity(const Eigen::MatrixXd& L, const Eigen::VectorXd& r) {
  if (L.rows() != r.size() || L.cols() != r.size()) {
    throw ValidationError("Laplacian and left eigenvector dimensions differ");
  }
  const Eigen::MatrixXd R = r.asDiagonal();
  const Eigen::MatrixXd Lt = R * L + L.transpose() * R;
  const Eigen::MatrixXd B = orthogonal_complement_basis(r);
  Eigen::MatrixXd lhs = B.transpose() * Lt * B;
  Eigen::MatrixXd rhs = 2.0 * B.transpose() * R * B;
  lhs = 0.5 * (lhs + lhs.transpose()).eval();
  rhs = 0.5 * (rhs + rhs.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> chol(rhs);
  if (chol.info() != Eigen::Success || chol.matrixLLT().diagonal().minCoeff() < 1e-12) {
    throw ValidationError("weighting B^T R B is numerically singular");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(lhs, rhs,
                                                                 Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success) {
    throw ValidationError("generalized eigenproblem did not converge");
  }
  return ges.eigenvalues().minCoeff();
}

Digraph scale(const Digraph& g, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("scale factor must be positive");
  return Digraph(s * g.adjacency());
}

StackedLaplacian::StackedLaplacian(const Eigen::MatrixXd& L, int m)
    : agents_(static_cast<int>(L.rows())), dim_(m) {
  if (L.rows() != L.cols()) throw ValidationError("Laplacian must be square");
  if (m < 1) throw ValidationError("block dimension must be positive");
  for (int i = 0; i < agents_; ++i) {
    for (int j = 0; j < agents_; ++j) {
      if (i != j && L(i, j) != 0.0) links_.push_back({i, j, -L(i, j)});
    }
  }
}

void StackedLaplacian::apply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  out.setZero(static_cast<Eigen::Index>(agents_) * dim_);
  for (const Link& e : links_) {
    out.segment(e.to * dim_, dim_) +=
        e.weight * (x.segment(e.to * dim_, dim_) - x.segment(e.from * dim_, dim_));
  }
}

Eigen::VectorXd StackedLaplacian::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out;
  apply(x, out);
  return out;
}

Eigen::MatrixXd StackedLaplacian::dense() const {
  const Eigen::Index n = static_cast<Eigen::Index>(agents_) * dim_;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (const Link& e : links_) {
    for (int k = 0; k < dim_; ++k) {
      K(e.to * dim_ + k, e.to * dim_ + k) += e.weight;
      K(e.to * dim_ + k, e.from * dim_ + k) -= e.weight;
    }
  }
  return K;
}

Eigen::VectorXd weighted_average(const Eigen::VectorXd& r, const Eigen::VectorXd& x, int m) {
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < r.size(); ++i) avg += r(i) * x.segment(i * m, m);
  return avg;
}

Eigen::VectorXd replicate(const Eigen::VectorXd& v, int agents) {
  return v.replicate(agents, 1);
}

SpectralData spectral_data(const Digraph& g) {
  if (!strongly_connected(g)) throw ValidationError("digraph is not strongly connected");
  SpectralData sd;
  sd.L = laplacian(g);
  sd.r = left_eigenvector(sd.L);
  const Eigen::MatrixXd R = sd.r.asDiagonal();
  sd.Ltilde = R * sd.L + sd.L.transpose() * R;
  sd.rho = generalized_connectivity(sd.L, sd.r);
  sd.rmin = sd.r.minCoeff();
  return sd;
}

}  // namespace pdflow
