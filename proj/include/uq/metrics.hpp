#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uq/predict.hpp"
#include "uq/tensor.hpp"

namespace uq {

/// Gaussian negative log-likelihood, natural log, averaged over components:
/// 0.5 log(sigma) + (y_gt - y_pred)^2 / (2 sigma), sigma being a variance.
/// Throws Error(numeric) if any sigma is below kVarFloor.
double nll_gaussian(std::span<const double> y_gt, std::span<const double> y_pred, std::span<const double> sigma);
double nll_gaussian(double y_gt, double y_pred, double sigma);

double rmse(std::span<const double> y_gt, std::span<const double> y_pred);

/// Explained variance 1 - Var(y_gt - y_pred) / Var(y_gt).
double eva(std::span<const double> y_gt, std::span<const double> y_pred);

/// Mean end-point error over H x W x 2 flow fields. `mask` (H x W, nonzero
/// = included) restricts the average.
double epe(const Tensor& flow_gt, const Tensor& flow_pred, const Tensor* mask = nullptr);

using Vec2 = std::array<double, 2>;

inline constexpr double kCovarianceRegularization = 1e-6;

/// Fit a maximum-likelihood Gaussian (divisor N, plus 1e-6 I) to each point
/// set and return KL(pred || gt).
double kl_fitted_gaussians(std::span<const Vec2> pred_set, std::span<const Vec2> gt_set);

inline constexpr std::size_t kDefaultSoftmaxDraws = 100;
inline constexpr double kProbabilityClamp = 1e-12;

struct CategoricalNll {
  double nll = 0.0;
  bool clamped = false;  ///< p[label] underflowed and was clamped to 1e-12
};

/// Draw `draws` logit vectors from N(mean, diag(sigma_tot)), average their
/// softmaxes and return -log p[label].
CategoricalNll categorical_nll(const UncertaintyEstimate& logits, std::size_t label, std::size_t draws,
                               std::uint64_t seed);

std::size_t argmax(std::span<const double> values);

/// Fraction of rows whose arg-max logit equals the label.
double accuracy(std::span<const Tensor> mean_logits, std::span<const std::size_t> labels);

struct MetricReport {
  std::map<std::string, double> values;
  std::size_t count = 0;

  /// Flat JSON object: every metric plus "count".
  std::string to_json() const;
};

}  // namespace uq
