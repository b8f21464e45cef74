#include "uq/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "uq/error.hpp"

namespace uq {

namespace {

void require_finite(double x, const char* fn) {
  if (!std::isfinite(x)) throw Error(ErrorKind::numeric, std::string(fn) + ": non-finite argument");
}

}  // namespace

double std_normal_pdf(double x) {
  require_finite(x, "std_normal_pdf");
  constexpr double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) {
  require_finite(x, "std_normal_cdf");
  // erfc keeps full relative precision in the lower tail, unlike 1 + erf.
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

}  // namespace uq
