#pragma once

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uq/error.hpp"
#include "uq/model.hpp"
#include "uq/rng.hpp"
#include "uq/tensor.hpp"

namespace uq::test {

/// Runs fn and reports the ErrorKind it threw; fails the test if it did not throw uq::Error.
template <typename Fn>
ErrorKind error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected uq::Error");
  return ErrorKind::io;
}

inline LayerWeights dense_weights(std::size_t out, std::size_t in, std::vector<double> w, std::vector<double> b) {
  return {Tensor({out, in}, std::move(w)), Tensor({out}, std::move(b))};
}

/// Dense/relu/dropout chain built from a compact description. Each entry is
/// either a weighted dense layer or one of "relu" / "dropout".
struct LayerDesc {
  std::string kind;
  LayerWeights weights{Tensor({1}), Tensor({1})};
};

inline NetworkGraph chain(Shape input, const std::vector<LayerDesc>& descs) {
  std::vector<LayerSpec> layers;
  std::map<std::string, LayerWeights> weights;
  for (std::size_t i = 0; i < descs.size(); ++i) {
    const auto name = descs[i].kind + std::to_string(i);
    if (descs[i].kind == "dense") {
      const auto& w = descs[i].weights.weight;
      layers.push_back(LayerSpec::make_dense(name, w.shape()[1], w.shape()[0]));
      weights.emplace(name, descs[i].weights);
    } else if (descs[i].kind == "relu") {
      layers.push_back(LayerSpec::make(name, LayerKind::relu));
    } else if (descs[i].kind == "dropout") {
      layers.push_back(LayerSpec::make(name, LayerKind::dropout));
    } else if (descs[i].kind == "maxpool") {
      layers.push_back(LayerSpec::make(name, LayerKind::maxpool2x2));
    } else if (descs[i].kind == "flatten") {
      layers.push_back(LayerSpec::make(name, LayerKind::flatten));
    }
  }
  return NetworkGraph(std::move(input), std::move(layers), std::move(weights));
}

inline LayerDesc dense(std::size_t out, std::size_t in, std::vector<double> w, std::vector<double> b) {
  return {"dense", dense_weights(out, in, std::move(w), std::move(b))};
}
inline LayerDesc relu_layer() { return {"relu"}; }
inline LayerDesc dropout_layer() { return {"dropout"}; }

inline LayerDesc random_dense(CounterRng& rng, std::size_t out, std::size_t in) {
  std::vector<double> w(out * in), b(out);
  const double sd = std::sqrt(2.0 / static_cast<double>(in));
  for (auto& v : w) v = sd * rng.normal();
  for (auto& v : b) v = 0.1 * rng.normal();
  return dense(out, in, std::move(w), std::move(b));
}

inline Tensor random_tensor(CounterRng& rng, Shape shape, double sd = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = sd * rng.normal();
  return t;
}

/// Relative error |a - b| / |b| with an absolute fallback near zero.
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace uq::test
