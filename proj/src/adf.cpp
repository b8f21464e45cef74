#include "uq/adf.hpp"

#include <algorithm>
#include <cmath>

#include "uq/error.hpp"

namespace uq {

namespace {

double floor_var(double v) { return v > kVarFloor ? v : kVarFloor; }

void floor_all(Tensor& var) {
  for (auto& v : var.data()) v = floor_var(v);
}

void check_pair(const GaussianActivation& a) {
  if (a.mean.shape() != a.var.shape()) {
    throw Error(ErrorKind::shape, "activation mean " + shape_string(a.mean.shape()) + " and variance " +
                                      shape_string(a.var.shape()) + " differ in shape");
  }
}

}  // namespace

GaussianActivation make_activation(Tensor mean, Tensor var) {
  if (mean.shape() != var.shape()) {
    throw Error(ErrorKind::shape, "variance shape " + shape_string(var.shape()) + " does not match " +
                                      shape_string(mean.shape()));
  }
  for (double m : mean.data()) {
    if (!std::isfinite(m)) throw Error(ErrorKind::numeric, "non-finite activation mean");
  }
  for (double v : var.data()) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorKind::numeric, "variance must be finite and >= 0");
  }
  floor_all(var);
  return {std::move(mean), std::move(var)};
}

GaussianActivation make_activation(Tensor mean, double var) {
  Tensor v(mean.shape(), var);
  return make_activation(std::move(mean), std::move(v));
}

GaussianScalar gaussian_max(GaussianScalar a, GaussianScalar b) {
  // With d = ma - mb, theta^2 = va + vb, alpha = d / theta, P = Phi(alpha),
  // Q = Phi(-alpha), f = phi(alpha):
  //   E[max]   = mb + d P + theta f
  //   Var[max] = va P + vb Q + theta^2 (alpha^2 P Q - alpha f (P - Q) - f^2)
  // which equals Clark's E[max^2] - E[max]^2 without subtracting two large
  // squares.
  const double theta2 = a.var + b.var;
  const double theta = std::sqrt(theta2);
  const double d = a.mean - b.mean;
  const double alpha = d / theta;
  const double p = std_normal_cdf(alpha);
  const double q = std_normal_cdf(-alpha);
  const double f = std_normal_pdf(alpha);
  const double mean = b.mean + d * p + theta * f;
  const double var = a.var * p + b.var * q + theta2 * (alpha * alpha * p * q - alpha * f * (p - q) - f * f);
  return {mean, floor_var(var)};
}

GaussianScalar rectified_moments(GaussianScalar a) {
  const double sigma = std::sqrt(a.var);
  const double t = a.mean / sigma;
  const double p = std_normal_cdf(t);
  const double q = std_normal_cdf(-t);
  const double f = std_normal_pdf(t);
  const double mean = std::max(0.0, a.mean * p + sigma * f);
  const double var = a.var * (p + t * t * p * q - t * f * (p - q) - f * f);
  return {mean, floor_var(var)};
}

GaussianActivation adf_affine(const LayerSpec& layer, const LayerWeights* weights, const GaussianActivation& a) {
  check_pair(a);
  switch (layer.kind) {
    case LayerKind::flatten:
      return {flatten(a.mean), flatten(a.var)};
    case LayerKind::dense:
    case LayerKind::conv2d: {
      if (!weights) throw Error(ErrorKind::weights, "affine layer '" + layer.name + "' without weights");
      const Tensor w2 = square(weights->weight);
      GaussianActivation out;
      if (layer.kind == LayerKind::dense) {
        out.mean = dense_apply(weights->weight, &weights->bias, a.mean);
        out.var = dense_apply(w2, nullptr, a.var);
      } else {
        out.mean = conv2d_apply(layer.conv, weights->weight, &weights->bias, a.mean);
        out.var = conv2d_apply(layer.conv, w2, nullptr, a.var);
      }
      floor_all(out.var);
      return out;
    }
    default:
      throw Error(ErrorKind::argument, std::string("adf_affine does not handle ") + to_string(layer.kind));
  }
}

GaussianActivation adf_relu(const GaussianActivation& a) {
  check_pair(a);
  GaussianActivation out{a.mean, a.var};
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    auto r = rectified_moments({a.mean[i], floor_var(a.var[i])});
    out.mean[i] = r.mean;
    out.var[i] = r.var;
  }
  return out;
}

GaussianActivation adf_maxpool2x2(const GaussianActivation& a) {
  check_pair(a);
  const auto& s = a.mean.shape();
  if (s.size() != 3 || s[1] % 2 != 0 || s[2] % 2 != 0) {
    throw Error(ErrorKind::shape, "maxpool2x2 needs [C,H,W] with even H, W; got " + shape_string(s));
  }
  const auto ch = s[0], h = s[1], w = s[2];
  GaussianActivation out{Tensor(Shape{ch, h / 2, w / 2}), Tensor(Shape{ch, h / 2, w / 2})};
  auto at = [&](std::size_t i) { return GaussianScalar{a.mean[i], floor_var(a.var[i])}; };
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t r = 0; r < h / 2; ++r) {
      for (std::size_t q = 0; q < w / 2; ++q) {
        const auto base = (c * h + 2 * r) * w + 2 * q;
        const auto top = gaussian_max(at(base), at(base + 1));
        const auto bottom = gaussian_max(at(base + w), at(base + w + 1));
        const auto m = gaussian_max(top, bottom);
        const auto o = (c * (h / 2) + r) * (w / 2) + q;
        out.mean[o] = m.mean;
        out.var[o] = m.var;
      }
    }
  }
  return out;
}

GaussianActivation adf_dropout(const GaussianActivation& a, const Tensor& site_mask, double rate) {
  check_pair(a);
  const DropoutConfig cfg(rate);
  const double scale = cfg.scale();
  GaussianActivation out{apply_mask(a.mean, site_mask, scale), apply_mask(a.var, site_mask, scale * scale)};
  floor_all(out.var);
  return out;
}

namespace {

GaussianActivation adf_impl(const NetworkGraph& g, const Tensor& x, const Tensor& v0, const MaskSet* mask,
                            double rate) {
  if (x.shape() != g.input_shape()) {
    throw Error(ErrorKind::shape, "input " + shape_string(x.shape()) + " does not match model input " +
                                      shape_string(g.input_shape()));
  }
  if (mask) check_mask(g, *mask);
  auto a = make_activation(x, v0);
  std::size_t site = 0;
  for (const auto& l : g.layers()) {
    switch (l.kind) {
      case LayerKind::dense:
      case LayerKind::conv2d: a = adf_affine(l, &g.weights_for(l), a); break;
      case LayerKind::flatten: a = adf_affine(l, nullptr, a); break;
      case LayerKind::relu: a = adf_relu(a); break;
      case LayerKind::maxpool2x2: a = adf_maxpool2x2(a); break;
      case LayerKind::dropout:
        if (mask) a = adf_dropout(a, mask->sites[site], rate);
        ++site;
        break;
    }
  }
  return a;
}

}  // namespace

GaussianActivation adf_forward(const NetworkGraph& g, const Tensor& x, const Tensor& v0) {
  return adf_impl(g, x, v0, nullptr, 0.0);
}

GaussianActivation adf_forward(const NetworkGraph& g, const Tensor& x, double v0) {
  return adf_impl(g, x, Tensor(x.shape(), v0), nullptr, 0.0);
}

GaussianActivation adf_forward(const NetworkGraph& g, const Tensor& x, const Tensor& v0, const MaskSet& mask,
                               const DropoutConfig& cfg) {
  return adf_impl(g, x, v0, &mask, cfg.rate());
}

GaussianActivation adf_forward(const NetworkGraph& g, const Tensor& x, double v0, const MaskSet& mask,
                               const DropoutConfig& cfg) {
  return adf_impl(g, x, Tensor(x.shape(), v0), &mask, cfg.rate());
}

}  // namespace uq
