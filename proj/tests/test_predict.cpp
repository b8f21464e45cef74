#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "support.hpp"
#include "uq/adf.hpp"
#include "uq/oracle.hpp"
#include "uq/predict.hpp"
#include "uq/synthetic.hpp"

using namespace uq;
using namespace uq::test;

TEST_CASE("sample_masks examples") {
  const auto g = random_mlp(2, {3, 8, 8, 1}, true);
  for (const auto& m : sample_masks(g, DropoutConfig(0.0), 9, 5))
    for (const auto& s : m.sites)
      for (double v : s.values()) CHECK(v == 1.0);

  const NetworkGraph wide({1000000}, {LayerSpec::make("drop", LayerKind::dropout)}, {});
  const auto masks = sample_masks(wide, DropoutConfig(0.5), 4, 1);
  double kept = 0.0;
  for (double v : masks[0].sites[0].values()) kept += v;
  CHECK(std::abs(kept / 1e6 - 0.5) <= 0.002);

  const DropoutConfig cfg(0.3);
  const auto a = sample_masks(g, cfg, 77, 6);
  const auto b = sample_masks(g, cfg, 77, 6);
  CHECK(a == b);
  CHECK(a.size() == 6);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(regenerate_mask(g, cfg, 77, t) == a[t]);
  CHECK_FALSE(a[0] == a[1]);
  CHECK_FALSE(sample_masks(g, cfg, 78, 1)[0] == a[0]);
  // Longer runs extend shorter ones: sample t depends on (seed, t) only.
  const auto longer = sample_masks(g, cfg, 77, 10);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(longer[t] == a[t]);
  CHECK(error_kind_of([&] { (void)sample_masks(g, cfg, 1, 0); }) == ErrorKind::argument);
}

TEST_CASE("mask entries are Bernoulli(keep) and independent across sites") {
  const NetworkGraph g({20000}, {LayerSpec::make("d1", LayerKind::dropout), LayerSpec::make("d2", LayerKind::dropout)},
                       {});
  const auto m = regenerate_mask(g, DropoutConfig(0.2), 5, 0);
  double k1 = 0.0, k2 = 0.0, both = 0.0;
  for (std::size_t i = 0; i < 20000; ++i) {
    k1 += m.sites[0][i];
    k2 += m.sites[1][i];
    both += m.sites[0][i] * m.sites[1][i];
  }
  const double n = 20000.0, sd = std::sqrt(0.8 * 0.2 / n);
  CHECK(std::abs(k1 / n - 0.8) <= 4 * sd);
  CHECK(std::abs(k2 / n - 0.8) <= 4 * sd);
  CHECK(std::abs(both / n - 0.64) <= 4 * std::sqrt(0.64 * 0.36 / n));
}

TEST_CASE("mc_model_variance") {
  const std::vector<Tensor> two{Tensor::vector({1}), Tensor::vector({3})};
  CHECK(mc_model_variance(two)[0] == 1.0);
  const std::vector<Tensor> same(3, Tensor::vector({2.5}));
  CHECK(mc_model_variance(same)[0] == 0.0);
  CHECK(error_kind_of([] { (void)mc_model_variance(std::vector<Tensor>{Tensor::vector({1})}); }) ==
        ErrorKind::argument);

  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(3.0, 2.0);
  std::vector<Tensor> xs;
  std::vector<double> raw;
  for (int i = 0; i < 50; ++i) {
    raw.push_back(n(gen));
    xs.push_back(Tensor::vector({raw.back()}));
  }
  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= 50.0;
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  var /= 50.0;
  CHECK(std::abs(mc_model_variance(xs)[0] - var) <= 1e-12);
}

TEST_CASE("combine_samples arithmetic") {
  const std::vector<GaussianActivation> outs{make_activation(Tensor::vector({1}), 0.1),
                                             make_activation(Tensor::vector({3}), 0.3)};
  const auto est = combine_samples(outs, 3);
  CHECK(est.mean[0] == 2.0);
  CHECK(est.data_part[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(est.model_part[0] == 1.0);
  CHECK(est.sigma_tot[0] == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(est.samples == 2);
  CHECK(error_kind_of([&] { (void)combine_samples(std::span(outs).first(1)); }) == ErrorKind::argument);
}

TEST_CASE("rate 0 has no model part") {
  const auto g = random_mlp(8, {4, 10, 10, 2}, true);
  const Tensor x = random_input(8, g.input_shape());
  const auto est = estimate_uncertainty(g, x, 0.02, DropoutConfig(0.0), 20, 1);
  const auto single = adf_forward(g, x, 0.02);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(est.model_part[k] == 0.0);
    CHECK(est.sigma_tot[k] == est.data_part[k]);
    CHECK(est.data_part[k] == doctest::Approx(single.var[k]).epsilon(1e-14));
    CHECK(est.mean[k] == doctest::Approx(single.mean[k]).epsilon(1e-14));
  }
}

TEST_CASE("estimate_uncertainty rejects T < 2") {
  const auto g = random_mlp(1, {2, 4, 1}, true);
  CHECK(error_kind_of([&] {
          (void)estimate_uncertainty(g, Tensor({2}, 0.0), 0.1, DropoutConfig(0.1), 1, 0);
        }) == ErrorKind::argument);
}

TEST_CASE("total variance tracks the joint oracle") {
  // Slack combines the oracle's standard error with the estimator's own
  // sampling error over T mask draws.
  const auto g = random_mlp(5, {4, 16, 16, 1}, true);
  const Tensor x = random_input(5, g.input_shape());
  const DropoutConfig cfg(0.2);
  const std::size_t T = 50;
  std::vector<GaussianActivation> outs;
  for (const auto& m : sample_masks(g, cfg, 3, T)) outs.push_back(adf_forward(g, x, 0.01, m, cfg));
  const auto est = combine_samples(outs, 3);
  const auto orc = mc_total_oracle(g, x, Tensor(x.shape(), 0.01), cfg, 100000, 11);
  double m2 = 0.0, m4 = 0.0;
  for (const auto& o : outs) {
    const double d = o.mean[0] - est.mean[0];
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= T;
  m4 /= T;
  const double se = std::sqrt((m4 - m2 * m2) / T + orc.var_stderr[0] * orc.var_stderr[0]);
  CHECK(std::abs(est.sigma_tot[0] - orc.var[0]) <= std::max(0.1 * orc.var[0], 3.0 * se));
}

TEST_CASE("decomposition identity is bit-exact") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = seed % 3 ? random_mlp(seed, {3, 9, 9, 4}, true) : random_conv_net(seed, 1, 4, 2, 6, 3, true);
    const Tensor x = random_input(seed, g.input_shape());
    const auto est = estimate_uncertainty(g, x, 0.05, DropoutConfig(0.1 + 0.01 * seed), 7, seed);
    for (std::size_t k = 0; k < est.mean.size(); ++k) {
      CHECK(est.sigma_tot[k] - (est.data_part[k] + est.model_part[k]) == 0.0);
      CHECK(est.model_part[k] >= 0.0);
      CHECK(est.data_part[k] >= kVarFloor);
    }
  }
}

TEST_CASE("zero noise reduces to the mask-only variance") {
  CounterRng rng(31);
  const auto l1 = random_dense(rng, 8, 4);
  const auto l2 = random_dense(rng, 3, 8);
  const auto g = chain({4}, {l1, dropout_layer(), l2});
  const Tensor x = random_tensor(rng, {4});
  const DropoutConfig cfg(0.3);
  // Largest squared-weight row sum; every layer may add at most one floor.
  auto gain = [](const Tensor& w) {
    double best = 0.0;
    for (std::size_t r = 0; r < w.shape()[0]; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < w.shape()[1]; ++c) s += w[r * w.shape()[1] + c] * w[r * w.shape()[1] + c];
      best = std::max(best, s);
    }
    return best;
  };
  const double g2 = gain(l2.weights.weight) * cfg.scale() * cfg.scale();
  const double affine_gain = g2 * gain(l1.weights.weight) + g2 + 1.0;
  const auto est = estimate_uncertainty(g, x, 0.0, cfg, 40, 12);
  std::vector<Tensor> det;
  for (const auto& m : sample_masks(g, cfg, 12, 40)) det.push_back(forward_deterministic(g, x, m, cfg));
  const Tensor model = mc_model_variance(det);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(est.data_part[k] <= 10 * kVarFloor * affine_gain);
    CHECK(std::abs(est.sigma_tot[k] - model[k]) <= 1e-8);
  }
}

TEST_CASE("results do not depend on the worker count") {
  const auto g = random_conv_net(4, 2, 6, 3, 8, 3, true);
  const Tensor x = random_input(4, g.input_shape());
  const auto one = estimate_uncertainty(g, x, 0.01, DropoutConfig(0.25), 33, 6, 1);
  for (std::size_t w : {2, 3, 8}) {
    const auto many = estimate_uncertainty(g, x, 0.01, DropoutConfig(0.25), 33, 6, w);
    CHECK(many.mean == one.mean);
    CHECK(many.sigma_tot == one.sigma_tot);
    CHECK(many.data_part == one.data_part);
    CHECK(many.model_part == one.model_part);
  }
}

TEST_CASE("total variance converges as T grows") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = random_mlp(seed + 40, {4, 12, 12, 2}, true);
    const Tensor x = random_input(seed, g.input_shape());
    const auto a = estimate_uncertainty(g, x, 0.01, DropoutConfig(0.2), 200, seed);
    const auto b = estimate_uncertainty(g, x, 0.01, DropoutConfig(0.2), 800, seed);
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(std::abs(a.sigma_tot[k] - b.sigma_tot[k]) <= 3.0 * b.sigma_tot[k] / std::sqrt(200.0));
  }
}

TEST_CASE("gate threshold") {
  CHECK(compute_gate_threshold(std::vector<double>{0.1, 0.3}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(compute_gate_threshold(std::vector<double>{0.7}) == doctest::Approx(3.5).epsilon(1e-15));
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(1000);
  for (auto& v : xs) v = u(gen);
  // 5 * mean of U(0,1) has sd 5 / sqrt(12 n); allow three of them.
  CHECK(std::abs(compute_gate_threshold(xs) - 2.5) <= 3.0 * 5.0 / std::sqrt(12.0 * 1000.0));
  CHECK(error_kind_of([] { (void)compute_gate_threshold(std::vector<double>{}); }) == ErrorKind::argument);
}

TEST_CASE("gate accept and reject") {
  auto estimate = [](std::vector<double> s) {
    UncertaintyEstimate e;
    e.mean = Tensor(Shape{s.size()}, 7.0);
    e.sigma_tot = Tensor(Shape{s.size()}, s);
    return e;
  };
  CHECK(gate(estimate({0.1}), 1.0).accepted);
  CHECK_FALSE(gate(estimate({2.0}), 1.0).accepted);
  CHECK_FALSE(gate(estimate({0.5, 1.5}), 1.0, GateReduce::max).accepted);
  CHECK(gate(estimate({0.5, 1.5}), 1.0, GateReduce::mean).accepted);
  CHECK(gate(estimate({1.0}), 1.0).accepted);
  const auto rejected = gate(estimate({2.0}), 1.0);
  CHECK(rejected.mean == Tensor({1}, 7.0));
  CHECK(error_kind_of([&] { (void)gate(estimate({0.1}), 0.0); }) == ErrorKind::argument);
}
