#pragma once

namespace uq {

/// Smallest variance ever stored in a Gaussian activation. Keeps the
/// rectification and max rules away from a division by zero.
inline constexpr double kVarFloor = 1e-9;

struct GaussianScalar {
  double mean = 0.0;
  double var = kVarFloor;
};

/// Standard normal density. Throws Error(numeric) on non-finite input.
double std_normal_pdf(double x);

/// Standard normal distribution function, accurate to ~1e-16 absolute.
/// Throws Error(numeric) on non-finite input.
double std_normal_cdf(double x);

}  // namespace uq
