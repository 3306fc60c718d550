#include "pdflow/integrators.hpp"

#include <algorithm>
#include <cmath>

namespace pdflow {

void Rk4Stepper::step(const Rhs& f, Eigen::VectorXd& y, double h) {
  const double h2 = 0.5 * h;
  f(y, k1_);
  tmp_ = y + h2 * k1_;
  f(tmp_, k2_);
  tmp_ = y + h2 * k2_;
  f(tmp_, k3_);
  tmp_ = y + h * k3_;
  f(tmp_, k4_);
  y += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
}

namespace {

// Dormand & Prince (1980) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b_hat
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

Dopri45Stepper::Dopri45Stepper(Eigen::Index n)
    : tmp_(n), k1_(n), k2_(n), k3_(n), k4_(n), k5_(n), k6_(n), k7_(n) {}

void Dopri45Stepper::attempt(const Rhs& f, const Eigen::VectorXd& y, double h,
                             Eigen::VectorXd& y_next, Eigen::VectorXd& err) {
  if (!have_fsal_) f(y, k1_);
  tmp_ = y + h * a21 * k1_;
  f(tmp_, k2_);
  tmp_ = y + h * (a31 * k1_ + a32 * k2_);
  f(tmp_, k3_);
  tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
  f(tmp_, k4_);
  tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
  f(tmp_, k5_);
  tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
  f(tmp_, k6_);
  y_next = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
  f(y_next, k7_);
  err = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
}

double scaled_error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                         const Eigen::VectorXd& y1, double rtol, double atol) {
  if (err.size() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    const double q = err(i) / sc;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace pdflow
