#include <doctest.h>

#include <cstring>
#include <json.hpp>
#include <string>
#include <vector>

#include "support.hpp"
#include "uq/model.hpp"
#include "uq/predict.hpp"
#include "uq/synthetic.hpp"
#include "uq/tensor_io.hpp"

using namespace uq;
using namespace uq::test;
using json = nlohmann::json;

namespace {

std::vector<std::uint8_t> floats(std::initializer_list<float> values) {
  std::vector<std::uint8_t> out;
  for (float v : values) put_f32_le(out, v);
  return out;
}

const char* kDense21 = R"({
  "version": 1,
  "input_shape": [2],
  "layers": [{"name": "fc", "kind": "dense", "in_dim": 2, "out_dim": 1}],
  "weights": [
    {"layer": "fc", "tensor": "W", "shape": [1, 2], "offset": 0},
    {"layer": "fc", "tensor": "b", "shape": [1], "offset": 8}
  ]
})";

}  // namespace

TEST_CASE("load a single dense layer") {
  const auto g = load_model(std::string(kDense21), floats({0.5f, -1.0f, 2.0f}));
  CHECK(g.layers().size() == 1);
  CHECK(g.weights().size() == 1);
  CHECK(g.output_shape() == Shape{1});
  CHECK(forward_deterministic(g, Tensor::vector({2, 1})) == Tensor::vector({2.0}));
}

TEST_CASE("surplus weight bytes are a shape error") {
  CHECK(error_kind_of([] { (void)load_model(std::string(kDense21), floats({1, 2, 3, 4})); }) == ErrorKind::shape);
  CHECK(error_kind_of([] { (void)load_model(std::string(kDense21), floats({1, 2})); }) == ErrorKind::shape);
}

TEST_CASE("dropout between dense layers is one site") {
  const char* manifest = R"({
    "version": 1, "input_shape": [2],
    "layers": [
      {"name": "fc1", "kind": "dense", "in_dim": 2, "out_dim": 3},
      {"name": "drop", "kind": "dropout"},
      {"name": "fc2", "kind": "dense", "in_dim": 3, "out_dim": 1}],
    "weights": [
      {"layer": "fc1", "tensor": "W", "shape": [3, 2], "offset": 0},
      {"layer": "fc1", "tensor": "b", "shape": [3], "offset": 24},
      {"layer": "fc2", "tensor": "W", "shape": [1, 3], "offset": 36},
      {"layer": "fc2", "tensor": "b", "shape": [1], "offset": 48}]
  })";
  const auto g = load_model(std::string(manifest), floats({1, 2, 3, 4, 5, 6, 0, 0, 0, 1, 1, 1, 0}));
  CHECK(g.dropout_site_count() == 1);
  CHECK(g.dropout_site_shapes() == std::vector<Shape>{{3}});
}

TEST_CASE("loader error kinds are distinct") {
  const auto blob = floats({0.5f, -1.0f, 2.0f});
  CHECK(error_kind_of([&] { (void)load_model(std::string("{not json"), blob); }) == ErrorKind::parse);

  auto doc = json::parse(kDense21);
  doc["version"] = 2;
  CHECK(error_kind_of([&] { (void)load_model(doc.dump(), blob); }) == ErrorKind::version);

  doc = json::parse(kDense21);
  doc["weights"].erase(1);
  CHECK(error_kind_of([&] { (void)load_model(doc.dump(), floats({0.5f, -1.0f})); }) == ErrorKind::weights);

  doc = json::parse(kDense21);
  doc["weights"][1]["shape"] = {2};
  CHECK(error_kind_of([&] { (void)load_model(doc.dump(), floats({1, 2, 3, 4})); }) == ErrorKind::shape);

  doc = json::parse(kDense21);
  doc["layers"].push_back({{"name", "fc2"}, {"kind", "dense"}, {"in_dim", 3}, {"out_dim", 1}});
  doc["weights"].push_back({{"layer", "fc2"}, {"tensor", "W"}, {"shape", {1, 3}}, {"offset", 12}});
  doc["weights"].push_back({{"layer", "fc2"}, {"tensor", "b"}, {"shape", {1}}, {"offset", 24}});
  CHECK(error_kind_of([&] { (void)load_model(doc.dump(), floats({1, 2, 3, 4, 5, 6, 7})); }) == ErrorKind::shape);

  doc = json::parse(kDense21);
  doc["weights"].push_back({{"layer", "ghost"}, {"tensor", "W"}, {"shape", {1}}, {"offset", 12}});
  CHECK(error_kind_of([&] { (void)load_model(doc.dump(), floats({1, 2, 3, 4})); }) == ErrorKind::weights);

  doc = json::parse(kDense21);
  doc["layers"][0]["kind"] = "lstm";
  CHECK(error_kind_of([&] { (void)load_model(doc.dump(), blob); }) == ErrorKind::parse);
}

TEST_CASE("forward examples") {
  const auto g = chain({1}, {dense(1, 1, {2}, {0}), relu_layer()});
  CHECK(forward_deterministic(g, Tensor::vector({1})) == Tensor::vector({2}));
  CHECK(forward_deterministic(g, Tensor::vector({-1})) == Tensor::vector({0}));

  const NetworkGraph pool({1, 2, 2}, {LayerSpec::make("pool", LayerKind::maxpool2x2)}, {});
  CHECK(forward_deterministic(pool, Tensor({1, 2, 2}, {1, 2, 3, 4})) == Tensor({1, 1, 1}, {4}));
  CHECK(error_kind_of([&] { (void)forward_deterministic(g, Tensor::vector({1, 2})); }) == ErrorKind::shape);
}

TEST_CASE("conv2d with stride and padding") {
  Conv2dParams p{1, 1, 2, 2, 1, 0, 0};
  const Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor w({1, 1, 2, 2}, 1.0);
  const Tensor b({1}, {0.5});
  CHECK(conv2d_apply(p, w, &b, x) == Tensor({1, 2, 2}, {12.5, 16.5, 24.5, 28.5}));

  p.stride = 2;
  p.pad_h = p.pad_w = 1;
  // Padded 5x5 grid, windows at rows/cols {0, 2}.
  CHECK(conv2d_apply(p, w, nullptr, x) == Tensor({1, 2, 2}, {1, 5, 11, 28}));
}

TEST_CASE("validate_graph findings") {
  CHECK(validate_graph(random_mlp(1, {4, 8, 8, 2}, true)).empty());

  Conv2dParams p{1, 2, 3, 3, 0, 1, 1};
  const NetworkGraph strided({1, 4, 4}, {LayerSpec::make_conv2d("conv", p)},
                             {{"conv", {Tensor({2, 1, 3, 3}), Tensor({2})}}});
  CHECK(validate_graph(strided).size() == 1);

  const NetworkGraph twins({2}, {LayerSpec::make("a", LayerKind::relu), LayerSpec::make("a", LayerKind::relu)}, {});
  CHECK(validate_graph(twins).size() == 1);

  const NetworkGraph incompatible({3}, {LayerSpec::make_dense("fc", 2, 1)},
                                  {{"fc", dense_weights(1, 2, {1, 1}, {0})}});
  CHECK_FALSE(validate_graph(incompatible).empty());
}

TEST_CASE("DropoutConfig rate bounds") {
  CHECK(DropoutConfig(0.0).scale() == 1.0);
  CHECK(DropoutConfig(0.5).scale() == 2.0);
  CHECK(error_kind_of([] { DropoutConfig c(1.0); }) == ErrorKind::argument);
  CHECK(error_kind_of([] { DropoutConfig c(-0.1); }) == ErrorKind::argument);
}

TEST_CASE("rate 0 with an all-ones mask equals the plain forward pass") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = seed % 2 ? random_mlp(seed, {5, 7, 6, 3}, true) : random_conv_net(seed, 2, 4, 3, 5, 2, true);
    const Tensor x = random_input(seed + 99, g.input_shape());
    MaskSet ones;
    for (const auto& s : g.dropout_site_shapes()) ones.sites.emplace_back(s, 1.0);
    CHECK(forward_deterministic(g, x, ones, DropoutConfig(0.0)) == forward_deterministic(g, x));
  }
}

TEST_CASE("mask mismatches are rejected") {
  const auto g = random_mlp(3, {4, 6, 2}, true);
  const Tensor x = random_input(1, g.input_shape());
  CHECK(error_kind_of([&] { (void)forward_deterministic(g, x, MaskSet{}, DropoutConfig(0.1)); }) == ErrorKind::mask);
  CHECK(error_kind_of([&] {
          (void)forward_deterministic(g, x, MaskSet{{Tensor({5}, 1.0)}}, DropoutConfig(0.1));
        }) == ErrorKind::mask);
  CHECK(error_kind_of([&] {
          (void)forward_deterministic(g, x, MaskSet{{Tensor({6}, 0.5)}}, DropoutConfig(0.1));
        }) == ErrorKind::mask);
}

TEST_CASE("forward composes over any split point") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = seed % 2 ? random_mlp(seed, {3, 8, 8, 8, 2}, false) : random_conv_net(seed, 1, 6, 4, 6, 3, false);
    const Tensor x = random_input(seed, g.input_shape());
    const Tensor full = forward_deterministic(g, x);
    for (std::size_t k = 1; k < g.layers().size(); ++k) {
      const auto head = g.slice(0, k);
      const auto tail = g.slice(k, g.layers().size());
      CHECK(forward_deterministic(tail, forward_deterministic(head, x)) == full);
    }
  }
}

TEST_CASE("save then load reproduces the graph at float32 precision") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto g = seed % 2 ? random_mlp(seed, {4, 9, 3}, true) : random_conv_net(seed, 2, 4, 3, 5, 2, true);
    const auto first = save_model(g);
    const auto loaded = load_model(first.manifest, first.weights);
    for (const auto& [name, w] : g.weights()) {
      const auto& lw = loaded.weights().at(name);
      for (std::size_t i = 0; i < w.weight.size(); ++i)
        CHECK(lw.weight[i] == static_cast<double>(static_cast<float>(w.weight[i])));
      for (std::size_t i = 0; i < w.bias.size(); ++i)
        CHECK(lw.bias[i] == static_cast<double>(static_cast<float>(w.bias[i])));
    }
    const auto second = save_model(loaded);
    CHECK(second.manifest == first.manifest);
    CHECK(second.weights == first.weights);
    CHECK(validate_graph(loaded).empty());
  }
}
