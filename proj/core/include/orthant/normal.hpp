#pragma once

namespace orthant {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Standard normal density.
double norm_pdf(double x) noexcept;

/// Standard normal CDF, accurate in both tails (via erfc).
double norm_cdf(double x) noexcept;

/// Inverse standard normal CDF (Wichura's AS 241, ~1e-16 relative).
/// Returns -inf / +inf at 0 / 1.
double norm_quantile(double p) noexcept;

}  // namespace orthant
