#include "uq/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "uq/error.hpp"
#include "uq/rng.hpp"

namespace uq {

namespace {

Tensor gaussian_tensor(CounterRng& rng, Shape shape, double sd) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = sd * rng.normal();
  return t;
}

Tensor uniform_tensor(CounterRng& rng, Shape shape, double half_width) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = half_width * (2.0 * rng.uniform() - 1.0);
  return t;
}

}  // namespace

NetworkGraph random_mlp(std::uint64_t seed, const std::vector<std::size_t>& widths, bool with_dropout) {
  if (widths.size() < 2) throw Error(ErrorKind::argument, "an MLP needs input and output widths");
  CounterRng rng(stream_key(seed, StreamDomain::synthetic));
  std::vector<LayerSpec> layers;
  std::map<std::string, LayerWeights> weights;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const auto name = "fc" + std::to_string(i + 1);
    layers.push_back(LayerSpec::make_dense(name, widths[i], widths[i + 1]));
    const double sd = std::sqrt(2.0 / static_cast<double>(widths[i]));
    weights.emplace(name, LayerWeights{gaussian_tensor(rng, {widths[i + 1], widths[i]}, sd),
                                       uniform_tensor(rng, {widths[i + 1]}, 0.1)});
    if (i + 2 < widths.size()) {
      layers.push_back(LayerSpec::make("relu" + std::to_string(i + 1), LayerKind::relu));
      if (with_dropout) layers.push_back(LayerSpec::make("drop" + std::to_string(i + 1), LayerKind::dropout));
    }
  }
  return NetworkGraph({widths.front()}, std::move(layers), std::move(weights));
}

NetworkGraph random_conv_net(std::uint64_t seed, std::size_t channels, std::size_t size, std::size_t filters,
                             std::size_t hidden, std::size_t outputs, bool with_dropout) {
  if (size % 2 != 0) throw Error(ErrorKind::argument, "image size must be even for 2x2 pooling");
  CounterRng rng(stream_key(seed, StreamDomain::synthetic));
  Conv2dParams c{channels, filters, 3, 3, 1, 1, 1};
  std::vector<LayerSpec> layers;
  std::map<std::string, LayerWeights> weights;
  layers.push_back(LayerSpec::make_conv2d("conv1", c));
  weights.emplace("conv1", LayerWeights{gaussian_tensor(rng, {filters, channels, 3, 3},
                                                        std::sqrt(2.0 / static_cast<double>(9 * channels))),
                                        uniform_tensor(rng, {filters}, 0.1)});
  layers.push_back(LayerSpec::make("relu1", LayerKind::relu));
  layers.push_back(LayerSpec::make("pool1", LayerKind::maxpool2x2));
  if (with_dropout) layers.push_back(LayerSpec::make("drop1", LayerKind::dropout));
  layers.push_back(LayerSpec::make("flat", LayerKind::flatten));
  const auto flat = filters * (size / 2) * (size / 2);
  layers.push_back(LayerSpec::make_dense("fc1", flat, hidden));
  weights.emplace("fc1", LayerWeights{gaussian_tensor(rng, {hidden, flat}, std::sqrt(2.0 / static_cast<double>(flat))),
                                      uniform_tensor(rng, {hidden}, 0.1)});
  layers.push_back(LayerSpec::make("relu2", LayerKind::relu));
  if (with_dropout) layers.push_back(LayerSpec::make("drop2", LayerKind::dropout));
  layers.push_back(LayerSpec::make_dense("fc2", hidden, outputs));
  weights.emplace("fc2", LayerWeights{gaussian_tensor(rng, {outputs, hidden}, std::sqrt(2.0 / static_cast<double>(hidden))),
                                      uniform_tensor(rng, {outputs}, 0.1)});
  return NetworkGraph({channels, size, size}, std::move(layers), std::move(weights));
}

NetworkGraph perturb_weights(const NetworkGraph& g, double scale, std::uint64_t seed) {
  CounterRng rng(derive_key(stream_key(seed, StreamDomain::synthetic), 0x70657274));
  auto weights = g.weights();
  for (auto& [name, w] : weights) {
    for (Tensor* t : {&w.weight, &w.bias}) {
      for (auto& v : t->data()) v += scale * std::abs(v) * rng.normal();
    }
  }
  return NetworkGraph(g.input_shape(), g.layers(), std::move(weights));
}

Tensor random_input(std::uint64_t seed, const Shape& shape) {
  CounterRng rng(derive_key(stream_key(seed, StreamDomain::synthetic), 0x696e7075));
  return gaussian_tensor(rng, shape, 1.0);
}

RegressionTask make_regression_task(const RegressionTaskConfig& cfg) {
  if (cfg.widths.size() < 2) throw Error(ErrorKind::argument, "task needs input and output widths");
  const std::size_t outputs = cfg.widths.back();
  if (cfg.labels == TaskLabels::flow && outputs % 2 != 0)
    throw Error(ErrorKind::argument, "flow task needs an even output width");
  if (cfg.labels == TaskLabels::classification && outputs < 2)
    throw Error(ErrorKind::argument, "classification task needs at least two outputs");
  const auto teacher = random_mlp(cfg.seed, cfg.widths, false);
  const auto model = perturb_weights(random_mlp(cfg.seed, cfg.widths, true), cfg.weight_noise, cfg.seed);
  CounterRng rng(derive_key(stream_key(cfg.seed, StreamDomain::synthetic), 0x64617461));
  const double sd = std::sqrt(cfg.noise_var);
  auto make_split = [&](std::size_t n, const char* prefix) {
    Dataset d;
    d.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Tensor clean = gaussian_tensor(rng, {cfg.widths.front()}, 1.0);
      Tensor noisy = clean;
      for (auto& v : noisy.data()) v += sd * rng.normal();
      char id[32];
      std::snprintf(id, sizeof id, "%s%05zu", prefix, i);
      Tensor y = forward_deterministic(teacher, clean);
      if (cfg.labels == TaskLabels::classification) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < outputs; ++k)
          if (y[k] > y[best]) best = k;
        y = Tensor({1}, static_cast<double>(best));
      } else if (cfg.labels == TaskLabels::flow) {
        y = y.reshaped({1, outputs / 2, 2});
      }
      d.push_back({id, std::move(noisy), std::move(y)});
    }
    return d;
  };
  RegressionTask task{teacher, model, {}, {}, cfg.noise_var};
  task.calibration = make_split(cfg.calibration_size, "cal");
  task.test = make_split(cfg.test_size, "test");
  return task;
}

}  // namespace uq
