#pragma once

#include <cstdint>
#include <vector>

#include "uq/dataset.hpp"
#include "uq/model.hpp"

namespace uq {

/// Fully connected ReLU network with He-initialised weights and small
/// biases. `widths` lists input, hidden and output sizes. With
/// `with_dropout`, a dropout site follows every hidden ReLU.
NetworkGraph random_mlp(std::uint64_t seed, const std::vector<std::size_t>& widths, bool with_dropout);

/// Small image network on [channels, size, size] input:
/// conv3x3(pad 1) -> relu -> maxpool2x2 -> flatten -> dense -> relu -> dense.
NetworkGraph random_conv_net(std::uint64_t seed, std::size_t channels, std::size_t size, std::size_t filters,
                             std::size_t hidden, std::size_t outputs, bool with_dropout);

/// Same graph with every weight and bias w replaced by w + scale * |w| * n,
/// n ~ N(0, 1).
NetworkGraph perturb_weights(const NetworkGraph& g, double scale, std::uint64_t seed);

/// Random input tensor with i.i.d. N(0, 1) entries.
Tensor random_input(std::uint64_t seed, const Shape& shape);

enum class TaskLabels {
  regression,      ///< y = teacher(clean x)
  classification,  ///< y = [argmax teacher(clean x)]
  flow,            ///< y = teacher(clean x) reshaped to [1, outputs / 2, 2]
};

struct RegressionTaskConfig {
  std::uint64_t seed = 1;
  std::vector<std::size_t> widths{4, 16, 16, 1};
  double noise_var = 0.01;     ///< true sensor noise injected into stored inputs
  double weight_noise = 0.2;   ///< relative perturbation turning teacher into model
  std::size_t calibration_size = 200;
  std::size_t test_size = 500;
  TaskLabels labels = TaskLabels::regression;
};

/// Regression benchmark: labels come from a teacher MLP evaluated on clean
/// inputs; stored inputs carry Gaussian sensor noise; the model to be
/// evaluated is the teacher with perturbed weights and dropout sites.
struct RegressionTask {
  NetworkGraph teacher;
  NetworkGraph model;
  Dataset calibration;
  Dataset test;
  double noise_var = 0.0;
};

RegressionTask make_regression_task(const RegressionTaskConfig& cfg);

}  // namespace uq
