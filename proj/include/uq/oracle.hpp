#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uq/adf.hpp"
#include "uq/model.hpp"
#include "uq/predict.hpp"

namespace uq {

inline constexpr std::size_t kMinOracleDraws = 1000;

/// Brute-force Monte-Carlo moments of the network output.
struct OracleResult {
  Tensor mean;
  Tensor var;          ///< population variance of the draws
  Tensor mean_stderr;  ///< sqrt(var / N)
  Tensor var_stderr;   ///< sqrt((m4 - var^2) / N)
  std::size_t draws = 0;
};

/// Draw z ~ N(x, diag(v0)) N times and push each draw through
/// forward_deterministic with the given fixed mask (or none).
/// Depends only on model::forward_deterministic.
OracleResult mc_input_noise_oracle(const NetworkGraph& g, const Tensor& x, const Tensor& v0, const MaskSet* mask,
                                   const DropoutConfig& cfg, std::size_t draws, std::uint64_t seed,
                                   std::size_t workers = 1);

/// Jointly sample (dropout mask, input noise) per draw: a Monte-Carlo
/// estimate of the total predictive variance. With rate 0 this reproduces
/// mc_input_noise_oracle with no mask draw for draw.
OracleResult mc_total_oracle(const NetworkGraph& g, const Tensor& x, const Tensor& v0, const DropoutConfig& cfg,
                             std::size_t draws, std::uint64_t seed, std::size_t workers = 1);

struct ComponentComparison {
  std::size_t index = 0;
  double mean = 0.0, oracle_mean = 0.0, mean_rel_error = 0.0;
  double var = 0.0, oracle_var = 0.0, var_rel_error = 0.0;
  bool mean_ok = true;
  bool var_ok = true;
};

struct ComparisonReport {
  std::vector<ComponentComparison> components;
  double tol_mean = 0.0;
  double tol_var = 0.0;
  double max_mean_rel_error = 0.0;
  double max_var_rel_error = 0.0;
  std::size_t worst_mean_index = 0;
  std::size_t worst_var_index = 0;
  bool passed = true;

  std::string to_json() const;
};

/// Component-wise check: passes when |value - oracle| <= max(tol * |oracle|,
/// 3 * oracle stderr). The mean stderr is taken as at least sqrt(kVarFloor / N)
/// and the variance slack as at least kVarFloor.
ComparisonReport compare(const Tensor& mean, const Tensor& var, const OracleResult& oracle, double tol_mean,
                         double tol_var);
ComparisonReport compare(const GaussianActivation& adf, const OracleResult& oracle, double tol_mean, double tol_var);
ComparisonReport compare(const UncertaintyEstimate& est, const OracleResult& oracle, double tol_mean, double tol_var);

}  // namespace uq
