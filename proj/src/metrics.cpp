#include "uq/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "uq/error.hpp"
#include "uq/rng.hpp"

namespace uq {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(ErrorKind::shape, std::string(what) + ": length mismatch");
}

double population_variance(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

}  // namespace

double nll_gaussian(std::span<const double> y_gt, std::span<const double> y_pred, std::span<const double> sigma) {
  require_same_length(y_gt.size(), y_pred.size(), "nll_gaussian");
  require_same_length(y_gt.size(), sigma.size(), "nll_gaussian");
  if (y_gt.empty()) throw Error(ErrorKind::argument, "nll_gaussian: no values");
  double acc = 0.0;
  for (std::size_t i = 0; i < y_gt.size(); ++i) {
    if (!(sigma[i] >= kVarFloor)) throw Error(ErrorKind::numeric, "nll_gaussian: variance below floor");
    const double r = y_gt[i] - y_pred[i];
    acc += 0.5 * std::log(sigma[i]) + r * r / (2.0 * sigma[i]);
  }
  return acc / static_cast<double>(y_gt.size());
}

double nll_gaussian(double y_gt, double y_pred, double sigma) {
  return nll_gaussian(std::span<const double>(&y_gt, 1), std::span<const double>(&y_pred, 1),
                      std::span<const double>(&sigma, 1));
}

double rmse(std::span<const double> y_gt, std::span<const double> y_pred) {
  require_same_length(y_gt.size(), y_pred.size(), "rmse");
  if (y_gt.empty()) throw Error(ErrorKind::argument, "rmse: no values");
  double acc = 0.0;
  for (std::size_t i = 0; i < y_gt.size(); ++i) acc += (y_gt[i] - y_pred[i]) * (y_gt[i] - y_pred[i]);
  return std::sqrt(acc / static_cast<double>(y_gt.size()));
}

double eva(std::span<const double> y_gt, std::span<const double> y_pred) {
  require_same_length(y_gt.size(), y_pred.size(), "eva");
  if (y_gt.size() < 2) throw Error(ErrorKind::argument, "eva needs at least 2 values");
  const double var_gt = population_variance(y_gt);
  if (!(var_gt > 0.0)) throw Error(ErrorKind::numeric, "eva: ground truth has zero variance");
  std::vector<double> residual(y_gt.size());
  for (std::size_t i = 0; i < y_gt.size(); ++i) residual[i] = y_gt[i] - y_pred[i];
  return 1.0 - population_variance(residual) / var_gt;
}

double epe(const Tensor& flow_gt, const Tensor& flow_pred, const Tensor* mask) {
  if (flow_gt.shape() != flow_pred.shape()) throw Error(ErrorKind::shape, "epe: flow shapes differ");
  const auto& s = flow_gt.shape();
  if (s.size() != 3 || s[2] != 2) throw Error(ErrorKind::shape, "epe: flows must be H x W x 2");
  const auto pixels = s[0] * s[1];
  if (mask && mask->size() != pixels) throw Error(ErrorKind::shape, "epe: mask must be H x W");
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (mask && (*mask)[p] == 0.0) continue;
    const double du = flow_gt[2 * p] - flow_pred[2 * p];
    const double dv = flow_gt[2 * p + 1] - flow_pred[2 * p + 1];
    acc += std::hypot(du, dv);
    ++used;
  }
  if (used == 0) throw Error(ErrorKind::argument, "epe: mask selects no pixels");
  return acc / static_cast<double>(used);
}

namespace {

struct Fit2 {
  Vec2 mean;
  double sxx, sxy, syy;

  double det() const { return sxx * syy - sxy * sxy; }
};

Fit2 fit(std::span<const Vec2> pts) {
  if (pts.size() < 3) throw Error(ErrorKind::argument, "kl_fitted_gaussians needs >= 3 points per set");
  const double n = static_cast<double>(pts.size());
  Fit2 f{{0.0, 0.0}, 0.0, 0.0, 0.0};
  for (const auto& p : pts) {
    f.mean[0] += p[0];
    f.mean[1] += p[1];
  }
  f.mean[0] /= n;
  f.mean[1] /= n;
  for (const auto& p : pts) {
    const double dx = p[0] - f.mean[0], dy = p[1] - f.mean[1];
    f.sxx += dx * dx;
    f.sxy += dx * dy;
    f.syy += dy * dy;
  }
  f.sxx = f.sxx / n + kCovarianceRegularization;
  f.sxy = f.sxy / n;
  f.syy = f.syy / n + kCovarianceRegularization;
  if (!(f.det() > 0.0) || !std::isfinite(f.det())) {
    throw Error(ErrorKind::numeric, "kl_fitted_gaussians: singular covariance");
  }
  return f;
}

}  // namespace

double kl_fitted_gaussians(std::span<const Vec2> pred_set, std::span<const Vec2> gt_set) {
  const auto p = fit(pred_set);
  const auto q = fit(gt_set);
  // KL(N_p || N_q) = 0.5 [tr(Sq^-1 Sp) + dm^T Sq^-1 dm - 2 + ln(det Sq / det Sp)]
  const double dq = q.det();
  const double ixx = q.syy / dq, ixy = -q.sxy / dq, iyy = q.sxx / dq;
  const double trace = ixx * p.sxx + 2.0 * ixy * p.sxy + iyy * p.syy;
  const double dx = q.mean[0] - p.mean[0], dy = q.mean[1] - p.mean[1];
  const double maha = ixx * dx * dx + 2.0 * ixy * dx * dy + iyy * dy * dy;
  return 0.5 * (trace + maha - 2.0 + std::log(dq / p.det()));
}

CategoricalNll categorical_nll(const UncertaintyEstimate& logits, std::size_t label, std::size_t draws,
                               std::uint64_t seed) {
  const auto k = logits.mean.size();
  if (label >= k) throw Error(ErrorKind::argument, "categorical_nll: label out of range");
  if (draws < 1) throw Error(ErrorKind::argument, "categorical_nll: need at least one draw");
  CounterRng rng(stream_key(seed, StreamDomain::softmax_draw));
  std::vector<double> sd(k), z(k), avg(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) sd[i] = std::sqrt(std::max(0.0, logits.sigma_tot[i]));
  for (std::size_t s = 0; s < draws; ++s) {
    double zmax = -INFINITY;
    for (std::size_t i = 0; i < k; ++i) {
      z[i] = logits.mean[i] + sd[i] * rng.normal();
      zmax = std::max(zmax, z[i]);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      z[i] = std::exp(z[i] - zmax);
      norm += z[i];
    }
    for (std::size_t i = 0; i < k; ++i) avg[i] += z[i] / norm;
  }
  double p = avg[label] / static_cast<double>(draws);
  CategoricalNll out;
  if (!(p >= kProbabilityClamp)) {
    p = kProbabilityClamp;
    out.clamped = true;
  }
  out.nll = -std::log(p);
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::argument, "argmax of empty range");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

double accuracy(std::span<const Tensor> mean_logits, std::span<const std::size_t> labels) {
  require_same_length(mean_logits.size(), labels.size(), "accuracy");
  if (labels.empty()) throw Error(ErrorKind::argument, "accuracy: no samples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += argmax(mean_logits[i].data()) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::numeric, "metric '" + k + "' is not finite");
    j[k] = v;
  }
  j["count"] = count;
  return j.dump();
}

}  // namespace uq
