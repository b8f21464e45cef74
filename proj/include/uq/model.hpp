#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "uq/error.hpp"
#include "uq/tensor.hpp"

namespace uq {

inline constexpr int kManifestVersion = 1;

enum class LayerKind { dense, conv2d, relu, maxpool2x2, flatten, dropout };

const char* to_string(LayerKind kind);

struct DenseParams {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
};

/// Convolution over [channels, height, width] activations with explicit
/// zero padding.
struct Conv2dParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  DenseParams dense{};
  Conv2dParams conv{};

  bool has_weights() const noexcept { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

  /// Declared weight / bias shapes; only meaningful when has_weights().
  Shape weight_shape() const;
  Shape bias_shape() const;

  static LayerSpec make_dense(std::string name, std::size_t in_dim, std::size_t out_dim);
  static LayerSpec make_conv2d(std::string name, Conv2dParams params);
  static LayerSpec make(std::string name, LayerKind kind);
};

struct LayerWeights {
  Tensor weight;
  Tensor bias;
};

/// Single global dropout rate applied at every dropout site.
class DropoutConfig {
 public:
  DropoutConfig() = default;
  explicit DropoutConfig(double rate);

  double rate() const noexcept { return rate_; }
  double keep_probability() const noexcept { return 1.0 - rate_; }
  /// Inverted-dropout scale applied to kept activations.
  double scale() const noexcept { return 1.0 / (1.0 - rate_); }

 private:
  double rate_ = 0.0;
};

/// One Bernoulli realization: a {0,1} tensor per dropout site, in graph order.
struct MaskSet {
  std::vector<Tensor> sites;

  bool operator==(const MaskSet&) const = default;
};

struct Finding {
  ErrorKind kind;
  std::string message;
};

/// Ordered layer list plus weights. Immutable once constructed; load_model
/// guarantees the graph is valid, direct construction does not (use
/// validate_graph).
class NetworkGraph {
 public:
  NetworkGraph(Shape input_shape, std::vector<LayerSpec> layers,
               std::map<std::string, LayerWeights> weights);

  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const std::map<std::string, LayerWeights>& weights() const noexcept { return weights_; }

  /// Throws Error(weights) if the layer has no weights entry.
  const LayerWeights& weights_for(const LayerSpec& layer) const;

  std::size_t dropout_site_count() const noexcept;

  /// Activation shape after every layer (index i = output of layer i).
  /// Throws Error(shape) if the chain is incompatible.
  std::vector<Shape> layer_output_shapes() const;
  Shape output_shape() const;

  /// Shapes of the activations each dropout site masks, in order.
  std::vector<Shape> dropout_site_shapes() const;

  /// Layers [first, last) as a standalone graph.
  NetworkGraph slice(std::size_t first, std::size_t last) const;

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::map<std::string, LayerWeights> weights_;
};

/// Structural check. Empty result iff the graph is well formed.
std::vector<Finding> validate_graph(const NetworkGraph& g);

/// Parse a manifest + little-endian float32 weight blob. Weights are
/// widened to double. Throws Error with kind parse, version, shape or
/// weights.
NetworkGraph load_model(std::span<const std::uint8_t> manifest_bytes,
                        std::span<const std::uint8_t> weight_bytes);
NetworkGraph load_model(const std::string& manifest_json, std::span<const std::uint8_t> weight_bytes);

/// Reads `<stem>.json` and the sibling `<stem>.bin`.
NetworkGraph load_model_files(const std::filesystem::path& manifest_path);

struct SerializedModel {
  std::string manifest;
  std::vector<std::uint8_t> weights;
};

/// Inverse of load_model. Weights are narrowed to float32.
SerializedModel save_model(const NetworkGraph& g);
void save_model_files(const NetworkGraph& g, const std::filesystem::path& manifest_path);

// Layer kernels. Shared by the deterministic and the moment-propagating
// passes.
Tensor dense_apply(const Tensor& weight, const Tensor* bias, const Tensor& x);
Tensor conv2d_apply(const Conv2dParams& p, const Tensor& weight, const Tensor* bias, const Tensor& x);
Tensor relu(const Tensor& x);
Tensor maxpool2x2(const Tensor& x);
Tensor flatten(const Tensor& x);
Tensor apply_mask(const Tensor& x, const Tensor& mask, double scale);

/// Plain forward pass; dropout sites are identity.
Tensor forward_deterministic(const NetworkGraph& g, const Tensor& x);

/// Forward pass with a fixed dropout realization: each site multiplies by
/// mask / (1 - rate). Throws Error(mask) if the mask set does not fit.
Tensor forward_deterministic(const NetworkGraph& g, const Tensor& x, const MaskSet& mask,
                             const DropoutConfig& cfg);

/// Throws Error(mask) unless `mask` has one {0,1} tensor per dropout site of
/// the right shape.
void check_mask(const NetworkGraph& g, const MaskSet& mask);

}  // namespace uq
