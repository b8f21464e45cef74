#include "uq/predict.hpp"

#include <algorithm>
#include <cmath>

#include "uq/error.hpp"
#include "uq/parallel.hpp"
#include "uq/rng.hpp"

namespace uq {

namespace {

MaskSet mask_for_shapes(const std::vector<Shape>& shapes, const DropoutConfig& cfg, std::uint64_t seed,
                        std::uint64_t sample_index) {
  MaskSet m;
  m.sites.reserve(shapes.size());
  const auto sample_key = derive_key(stream_key(seed, StreamDomain::dropout_mask), sample_index);
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    Tensor site(shapes[s], 1.0);
    if (cfg.rate() > 0.0) {
      CounterRng rng(derive_key(sample_key, s));
      for (auto& v : site.data()) v = rng.bernoulli(cfg.keep_probability()) ? 1.0 : 0.0;
    }
    m.sites.push_back(std::move(site));
  }
  return m;
}

}  // namespace

MaskSet regenerate_mask(const NetworkGraph& g, const DropoutConfig& cfg, std::uint64_t seed,
                        std::uint64_t sample_index) {
  return mask_for_shapes(g.dropout_site_shapes(), cfg, seed, sample_index);
}

std::vector<MaskSet> sample_masks(const NetworkGraph& g, const DropoutConfig& cfg, std::uint64_t seed,
                                  std::size_t samples) {
  if (samples < 1) throw Error(ErrorKind::argument, "at least one mask sample is required");
  const auto shapes = g.dropout_site_shapes();
  std::vector<MaskSet> out;
  out.reserve(samples);
  for (std::size_t t = 0; t < samples; ++t) out.push_back(mask_for_shapes(shapes, cfg, seed, t));
  return out;
}

Tensor mc_model_variance(std::span<const Tensor> outputs) {
  if (outputs.size() < 2) throw Error(ErrorKind::argument, "model variance needs at least 2 samples");
  const auto& shape = outputs.front().shape();
  for (const auto& o : outputs) {
    if (o.shape() != shape) throw Error(ErrorKind::shape, "model variance over tensors of different shapes");
  }
  const double inv_t = 1.0 / static_cast<double>(outputs.size());
  // Deviations are taken relative to the first sample so identical samples give exactly 0.
  const Tensor& ref = outputs.front();
  Tensor shift(shape);
  for (const auto& o : outputs) {
    for (std::size_t i = 0; i < shift.size(); ++i) shift[i] += o[i] - ref[i];
  }
  for (auto& m : shift.data()) m *= inv_t;
  Tensor var(shape);
  for (const auto& o : outputs) {
    for (std::size_t i = 0; i < var.size(); ++i) {
      const double d = (o[i] - ref[i]) - shift[i];
      var[i] += d * d;
    }
  }
  for (auto& v : var.data()) v *= inv_t;
  return var;
}

UncertaintyEstimate combine_samples(std::span<const GaussianActivation> samples, std::uint64_t seed) {
  if (samples.size() < 2) throw Error(ErrorKind::argument, "T >= 2 required");
  const auto& shape = samples.front().mean.shape();
  for (const auto& s : samples) {
    if (s.mean.shape() != shape || s.var.shape() != shape) {
      throw Error(ErrorKind::shape, "ADF samples differ in shape");
    }
  }
  const double inv_t = 1.0 / static_cast<double>(samples.size());
  UncertaintyEstimate est;
  est.samples = samples.size();
  est.seed = seed;
  est.mean = Tensor(shape);
  est.data_part = Tensor(shape);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < est.mean.size(); ++i) {
      est.mean[i] += s.mean[i];
      est.data_part[i] += s.var[i];
    }
  }
  for (auto& m : est.mean.data()) m *= inv_t;
  for (auto& v : est.data_part.data()) v *= inv_t;

  const Tensor& ref = samples.front().mean;
  Tensor shift(shape);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < shift.size(); ++i) shift[i] += s.mean[i] - ref[i];
  }
  for (auto& m : shift.data()) m *= inv_t;
  est.model_part = Tensor(shape);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < est.mean.size(); ++i) {
      const double d = (s.mean[i] - ref[i]) - shift[i];
      est.model_part[i] += d * d;
    }
  }
  for (auto& v : est.model_part.data()) v *= inv_t;
  est.sigma_tot = add(est.data_part, est.model_part);
  return est;
}

UncertaintyEstimate estimate_uncertainty(const NetworkGraph& g, const Tensor& x, const Tensor& v0,
                                         const DropoutConfig& cfg, std::size_t samples, std::uint64_t seed,
                                         std::size_t workers) {
  if (samples < 2) throw Error(ErrorKind::argument, "T >= 2 required");
  const auto shapes = g.dropout_site_shapes();
  std::vector<GaussianActivation> outs(samples);
  parallel_for(samples, workers, [&](std::size_t t) {
    outs[t] = adf_forward(g, x, v0, mask_for_shapes(shapes, cfg, seed, t), cfg);
  });
  return combine_samples(outs, seed);
}

UncertaintyEstimate estimate_uncertainty(const NetworkGraph& g, const Tensor& x, double v0,
                                         const DropoutConfig& cfg, std::size_t samples, std::uint64_t seed,
                                         std::size_t workers) {
  return estimate_uncertainty(g, x, Tensor(x.shape(), v0), cfg, samples, seed, workers);
}

double compute_gate_threshold(std::span<const double> uncertainties) {
  if (uncertainties.empty()) throw Error(ErrorKind::argument, "gate threshold needs at least one uncertainty");
  double sum = 0.0;
  for (double u : uncertainties) sum += u;
  return 5.0 * (sum / static_cast<double>(uncertainties.size()));
}

GatedPrediction gate(const UncertaintyEstimate& est, double threshold, GateReduce reduce) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::argument, "gate threshold must be > 0");
  const auto s = est.sigma_tot.data();
  double level = 0.0;
  if (reduce == GateReduce::max) {
    level = *std::max_element(s.begin(), s.end());
  } else {
    for (double v : s) level += v;
    level /= static_cast<double>(s.size());
  }
  return {level <= threshold, est.mean, est.sigma_tot};
}

}  // namespace uq
