#pragma once

#include "uq/gaussian.hpp"
#include "uq/model.hpp"
#include "uq/tensor.hpp"

namespace uq {

/// Factorized Gaussian over an activation tensor: independent components
/// with the given means and variances. Variances are kept >= kVarFloor.
struct GaussianActivation {
  Tensor mean;
  Tensor var;
};

/// Build an activation from a mean tensor and a variance tensor of the same
/// shape, flooring the variances. Throws on shape mismatch, negative or
/// non-finite values.
GaussianActivation make_activation(Tensor mean, Tensor var);
/// Same, broadcasting a scalar variance.
GaussianActivation make_activation(Tensor mean, double var);

// Scalar moment-matching rules.

/// max(a, b) for independent Gaussians, matched to a Gaussian by its first
/// two moments (Clark's formulas, written in a cancellation-free form).
GaussianScalar gaussian_max(GaussianScalar a, GaussianScalar b);

/// max(a, 0), the rectified Gaussian.
GaussianScalar rectified_moments(GaussianScalar a);

// Layer rules.

/// Dense, conv2d or flatten layer. Exact for independent inputs:
/// mean' = W mean + b, var' = (W*W) var.
GaussianActivation adf_affine(const LayerSpec& layer, const LayerWeights* weights, const GaussianActivation& a);

GaussianActivation adf_relu(const GaussianActivation& a);

/// Each 2x2 window [a b; c d] is reduced as max(max(a, b), max(c, d)).
GaussianActivation adf_maxpool2x2(const GaussianActivation& a);

/// A fixed mask is a deterministic linear map: mean * m / (1 - rate),
/// var * m / (1 - rate)^2.
GaussianActivation adf_dropout(const GaussianActivation& a, const Tensor& site_mask, double rate);

/// Propagate (x, v0) through the whole graph. Without a mask the dropout
/// sites are identity.
GaussianActivation adf_forward(const NetworkGraph& g, const Tensor& x, const Tensor& v0);
GaussianActivation adf_forward(const NetworkGraph& g, const Tensor& x, double v0);
GaussianActivation adf_forward(const NetworkGraph& g, const Tensor& x, const Tensor& v0, const MaskSet& mask,
                               const DropoutConfig& cfg);
GaussianActivation adf_forward(const NetworkGraph& g, const Tensor& x, double v0, const MaskSet& mask,
                               const DropoutConfig& cfg);

}  // namespace uq
