#include "uq/calibrate.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "uq/error.hpp"
#include "uq/metrics.hpp"
#include "uq/parallel.hpp"
#include "uq/rng.hpp"

namespace uq {

std::vector<double> dropout_grid(std::size_t n, double lo, double hi) {
  if (n < 2) throw Error(ErrorKind::argument, "dropout grid needs at least 2 points");
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) {
    throw Error(ErrorKind::argument, "dropout grid bounds must satisfy 0 < lo < hi < 1");
  }
  std::vector<double> g(n);
  const double ratio = hi / lo;
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = lo * std::pow(ratio, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

double sample_nll(const UncertaintyEstimate& est, const Tensor& y_gt) {
  if (y_gt.size() != est.mean.size()) {
    throw Error(ErrorKind::shape, "label has " + std::to_string(y_gt.size()) + " components, network output " +
                                      std::to_string(est.mean.size()));
  }
  return nll_gaussian(y_gt.data(), est.mean.data(), est.sigma_tot.data()) * static_cast<double>(y_gt.size());
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t index) { return derive_key(seed, index); }

double dataset_nll(const NetworkGraph& g, const Dataset& data, const Tensor& v0, const DropoutConfig& cfg,
                   std::size_t samples, std::uint64_t seed, CalibrationObjective objective, std::size_t workers) {
  if (data.empty()) throw Error(ErrorKind::argument, "dataset is empty");
  std::vector<double> per_sample(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) {
    const auto s = sample_seed(seed, i);
    const auto est = estimate_uncertainty(g, data[i].x, v0, cfg, samples, s);
    if (objective == CalibrationObjective::gaussian) {
      per_sample[i] = sample_nll(est, data[i].y);
    } else {
      if (data[i].y.size() != 1) throw Error(ErrorKind::shape, "classification labels must hold one class index");
      const double label = data[i].y[0];
      if (!(label >= 0.0) || label != std::floor(label)) {
        throw Error(ErrorKind::argument, "class label must be a non-negative integer");
      }
      per_sample[i] = categorical_nll(est, static_cast<std::size_t>(label), kDefaultSoftmaxDraws, s).nll;
    }
  });
  double sum = 0.0;
  for (double v : per_sample) sum += v;
  return sum / static_cast<double>(data.size());
}

CalibrationResult calibrate_phi(const NetworkGraph& g, const Dataset& data, const Tensor& v0, std::size_t samples,
                                const std::vector<double>& grid, std::uint64_t seed,
                                CalibrationObjective objective, std::size_t workers) {
  if (data.empty()) throw Error(ErrorKind::argument, "calibration dataset is empty");
  if (grid.empty()) throw Error(ErrorKind::argument, "calibration grid is empty");
  const auto out_size = element_count(g.output_shape());
  for (const auto& s : data) {
    const auto expected = objective == CalibrationObjective::gaussian ? out_size : 1;
    if (s.y.size() != expected) throw Error(ErrorKind::shape, "label '" + s.id + "' does not match the network output");
  }
  CalibrationResult r;
  r.samples = samples;
  r.seed = seed;
  r.best_nll = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double rate : grid) {
    double nll = std::numeric_limits<double>::quiet_NaN();
    try {
      nll = dataset_nll(g, data, v0, DropoutConfig(rate), samples, seed, objective, workers);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numeric) throw;
    }
    r.grid.push_back({rate, nll});
    if (std::isfinite(nll) && nll < r.best_nll) {
      r.best_nll = nll;
      r.best_rate = rate;
      found = true;
    }
  }
  if (!found) throw Error(ErrorKind::numeric, "NLL is non-finite at every grid point");
  return r;
}

std::string CalibrationResult::to_json() const {
  nlohmann::ordered_json j;
  j["best_rate"] = best_rate;
  j["best_nll"] = best_nll;
  j["samples"] = samples;
  j["seed"] = seed;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& p : grid) {
    nlohmann::ordered_json row;
    row["rate"] = p.rate;
    if (std::isfinite(p.nll)) {
      row["nll"] = p.nll;
    } else {
      row["nll"] = nullptr;
    }
    rows.push_back(row);
  }
  j["grid"] = rows;
  return j.dump();
}

}  // namespace uq
