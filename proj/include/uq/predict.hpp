#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uq/adf.hpp"
#include "uq/model.hpp"

namespace uq {

inline constexpr std::size_t kDefaultSamples = 20;

/// Mask set for sample `sample_index`. Entry j of site s is kept with
/// probability 1 - rate, drawn from the stream keyed by
/// (seed, sample_index, s); nothing else influences it.
MaskSet regenerate_mask(const NetworkGraph& g, const DropoutConfig& cfg, std::uint64_t seed,
                        std::uint64_t sample_index);

std::vector<MaskSet> sample_masks(const NetworkGraph& g, const DropoutConfig& cfg, std::uint64_t seed,
                                  std::size_t samples);

/// Population variance (divisor T) across same-shape tensors.
Tensor mc_model_variance(std::span<const Tensor> outputs);

struct UncertaintyEstimate {
  Tensor mean;        ///< average of the per-sample ADF means
  Tensor sigma_tot;   ///< data_part + model_part
  Tensor data_part;   ///< average of the per-sample ADF variances
  Tensor model_part;  ///< population variance of the per-sample ADF means
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// Combine per-sample ADF outputs into the total-variance estimate.
/// Summation runs in sample order. Requires at least two samples.
UncertaintyEstimate combine_samples(std::span<const GaussianActivation> samples, std::uint64_t seed = 0);

/// T stochastic ADF passes with masks from (seed, t), combined with
/// combine_samples. The result does not depend on `workers`.
UncertaintyEstimate estimate_uncertainty(const NetworkGraph& g, const Tensor& x, const Tensor& v0,
                                         const DropoutConfig& cfg, std::size_t samples, std::uint64_t seed,
                                         std::size_t workers = 1);
UncertaintyEstimate estimate_uncertainty(const NetworkGraph& g, const Tensor& x, double v0,
                                         const DropoutConfig& cfg, std::size_t samples, std::uint64_t seed,
                                         std::size_t workers = 1);

/// Rejection threshold: five times the mean held-out uncertainty.
double compute_gate_threshold(std::span<const double> uncertainties);

enum class GateReduce { max, mean };

struct GatedPrediction {
  bool accepted = false;
  Tensor mean;
  Tensor sigma_tot;
};

/// Accepts iff reduce(sigma_tot) <= threshold.
GatedPrediction gate(const UncertaintyEstimate& est, double threshold, GateReduce reduce = GateReduce::max);

}  // namespace uq
