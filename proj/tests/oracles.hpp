#pragma once
// Independent reference computations. Nothing here calls into the library
// routine it is used to check.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <functional>
#include <random>
#include <vector>

namespace oracle {

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Transitive closure on the support of A (Floyd-Warshall).
inline bool strongly_connected_closure(const Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (Eigen::Index i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (A(i, j) > 0.0) reach[j][i] = true;  // edge j -> i
    }
  }
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (!reach[i][j]) return false;
  return true;
}

/// Solves [Lᵀ; 1ᵀ] r = [0; 1] in the least-squares sense (QR), a different
/// route from the SVD null space.
inline Eigen::VectorXd left_null_vector(const Eigen::MatrixXd& L) {
  const Eigen::Index n = L.rows();
  Eigen::MatrixXd A(n + 1, n);
  A.topRows(n) = L.transpose();
  A.row(n).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b(n) = 1.0;
  return A.colPivHouseholderQr().solve(b);
}

/// min over sampled x with rᵀx = 0 of xᵀ(RL + LᵀR)x / (2xᵀRx).
inline double rayleigh_sampled_rho(const Eigen::MatrixXd& L, const Eigen::VectorXd& r,
                                   int samples, unsigned seed) {
  const Eigen::MatrixXd R = r.asDiagonal();
  const Eigen::MatrixXd Lt = R * L + L.transpose() * R;
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd x(L.rows());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
    x -= (r.dot(x) / r.squaredNorm()) * r;  // Euclidean projection onto rᵀx = 0
    best = std::min(best, x.dot(Lt * x) / (2.0 * x.dot(R * x)));
  }
  return best;
}

/// Minimum generalized Rayleigh quotient by projected gradient descent from
/// many random starts; converges to the true minimum, unlike raw sampling in
/// higher dimension.
inline double rayleigh_descent_rho(const Eigen::MatrixXd& L, const Eigen::VectorXd& r, int starts,
                                   unsigned seed) {
  const Eigen::MatrixXd R = r.asDiagonal();
  const Eigen::MatrixXd Lt = R * L + L.transpose() * R;
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  double best = std::numeric_limits<double>::infinity();
  auto proj = [&](Eigen::VectorXd x) { return Eigen::VectorXd(x - (r.dot(x) / r.squaredNorm()) * r); };
  for (int s = 0; s < starts; ++s) {
    Eigen::VectorXd x(L.rows());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
    x = proj(x);
    for (int it = 0; it < 20000; ++it) {
      const double q = x.dot(Lt * x) / (2.0 * x.dot(R * x));
      const Eigen::VectorXd g = proj((Lt * x - 2.0 * q * (R * x)) / x.dot(R * x));
      x = proj(x - 0.05 * g);
      x /= x.norm();
    }
    best = std::min(best, x.dot(Lt * x) / (2.0 * x.dot(R * x)));
  }
  return best;
}

inline Eigen::MatrixXd expm(const Eigen::MatrixXd& A) { return A.exp(); }

}  // namespace oracle
