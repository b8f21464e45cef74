#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uq/dataset.hpp"
#include "uq/model.hpp"
#include "uq/predict.hpp"

namespace uq {

inline constexpr std::size_t kDefaultGridSize = 20;
inline constexpr double kDefaultGridLow = 1e-3;
inline constexpr double kDefaultGridHigh = 0.5;

/// n log-spaced rates from lo to hi, both included.
/// Requires 0 < lo < hi < 1 and n >= 2.
std::vector<double> dropout_grid(std::size_t n = kDefaultGridSize, double lo = kDefaultGridLow,
                                 double hi = kDefaultGridHigh);

enum class CalibrationObjective {
  gaussian,     ///< regression: sum over outputs of 0.5 log s + r^2 / 2s
  categorical,  ///< classification: -log of the MC-averaged softmax
};

/// Per-sample Gaussian NLL, summed over output components.
double sample_nll(const UncertaintyEstimate& est, const Tensor& y_gt);

/// Seed used for dataset sample `index`. Identical at every grid point, so
/// all rates see the same underlying uniform draws.
std::uint64_t sample_seed(std::uint64_t seed, std::size_t index);

/// Mean per-sample NLL over the dataset at one dropout rate.
double dataset_nll(const NetworkGraph& g, const Dataset& data, const Tensor& v0, const DropoutConfig& cfg,
                   std::size_t samples, std::uint64_t seed,
                   CalibrationObjective objective = CalibrationObjective::gaussian, std::size_t workers = 1);

struct GridPoint {
  double rate;
  double nll;  ///< mean over the dataset; NaN if it could not be evaluated
};

struct CalibrationResult {
  double best_rate = 0.0;
  double best_nll = 0.0;
  std::vector<GridPoint> grid;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

/// Grid search for the dropout rate minimising the held-out NLL. Ties go to
/// the smallest rate. Throws Error(numeric) if no grid point yields a
/// finite NLL.
CalibrationResult calibrate_phi(const NetworkGraph& g, const Dataset& data, const Tensor& v0, std::size_t samples,
                                const std::vector<double>& grid, std::uint64_t seed,
                                CalibrationObjective objective = CalibrationObjective::gaussian,
                                std::size_t workers = 1);

}  // namespace uq
