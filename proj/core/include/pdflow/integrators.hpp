#pragma once

#include <Eigen/Dense>

#include <functional>

namespace pdflow {

/// dy = F(y) for an autonomous system.
using Rhs = std::function<void(const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

/// Classical fixed-step fourth-order Runge-Kutta. Scratch vectors are kept
/// between calls.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(Eigen::Index n) : tmp_(n), k1_(n), k2_(n), k3_(n), k4_(n) {}

  void step(const Rhs& f, Eigen::VectorXd& y, double h);

 private:
  Eigen::VectorXd tmp_, k1_, k2_, k3_, k4_;
};

/// Dormand-Prince 5(4) embedded pair with FSAL.
class Dopri45Stepper {
 public:
  explicit Dopri45Stepper(Eigen::Index n);

  /// Attempts one step of size h from y. Writes the fifth-order solution to
  /// y_next and the difference to the embedded fourth-order solution to err.
  void attempt(const Rhs& f, const Eigen::VectorXd& y, double h, Eigen::VectorXd& y_next,
               Eigen::VectorXd& err);

  /// Must be called after an accepted step so the FSAL stage is reused.
  void accept() { have_fsal_ = true; k1_.swap(k7_); }
  void reset() { have_fsal_ = false; }

 private:
  bool have_fsal_ = false;
  Eigen::VectorXd tmp_, k1_, k2_, k3_, k4_, k5_, k6_, k7_;
};

/// RMS of err_i / (atol + rtol * max(|y0_i|, |y1_i|)).
double scaled_error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                         const Eigen::VectorXd& y1, double rtol, double atol);

}  // namespace pdflow
