#pragma once
// Frozen values for the canonical benchmark (unit weights, box [-5, 5]^4),
// computed once with an independent numpy/scipy script (scipy.linalg.null_space,
// scipy.linalg.eigh on the complement basis, closed-form gain formulas).

namespace frozen {

inline constexpr double kRho = 0.84861218113400261;
inline constexpr double kRmin = 1.0 / 6.0;
inline constexpr double kMu = 0.82991351337396635;
inline constexpr double kLbar = 158.4131591025766;  // ‖H1‖₂ + e^5 = 10 + e^5
inline constexpr double kLamMinM = 0.091449792426693488;  // alpha = 5, beta = 1
inline constexpr double kGammaMaxDual = 7.8706189095248154e-08;
inline constexpr double kGammaMaxPrimal = 3.7176260099704783e-09;
inline constexpr double kGammaMax = 3.7176260099704783e-09;
inline constexpr double kThresholdGammaHalf = 19022268.934934761;  // gamma = 0.5
inline constexpr double kCertifiedScaleGammaHalf = 149438258.19638255;

}  // namespace frozen
