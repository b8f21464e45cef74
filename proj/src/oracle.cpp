#include "uq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "uq/error.hpp"
#include "uq/gaussian.hpp"
#include "uq/parallel.hpp"
#include "uq/rng.hpp"

namespace uq {

namespace {

constexpr std::size_t kChunk = 4096;
constexpr std::uint64_t kOracleMaskSalt = 0x6f7261636c65ULL;

/// Streaming central moments up to order four, mergeable in a fixed order
/// (Terriberry / Pebay update formulas).
struct Moments {
  double n = 0.0, mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;

  void push(double x) {
    const double n1 = n;
    n += 1.0;
    const double delta = x - mean;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double term1 = delta * dn * n1;
    mean += dn;
    m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
    m3 += term1 * dn * (n - 2.0) - 3.0 * dn * m2;
    m2 += term1;
  }

  void merge(const Moments& b) {
    if (b.n == 0.0) return;
    if (n == 0.0) {
      *this = b;
      return;
    }
    const double na = n, nb = b.n, nn = na + nb;
    const double delta = b.mean - mean;
    const double d2 = delta * delta, d3 = d2 * delta, d4 = d2 * d2;
    const double new_m4 = m4 + b.m4 + d4 * na * nb * (na * na - na * nb + nb * nb) / (nn * nn * nn) +
                          6.0 * d2 * (na * na * b.m2 + nb * nb * m2) / (nn * nn) +
                          4.0 * delta * (na * b.m3 - nb * m3) / nn;
    const double new_m3 = m3 + b.m3 + d3 * na * nb * (na - nb) / (nn * nn) + 3.0 * delta * (na * b.m2 - nb * m2) / nn;
    m2 += b.m2 + d2 * na * nb / nn;
    m3 = new_m3;
    m4 = new_m4;
    mean += delta * nb / nn;
    n = nn;
  }
};

std::vector<Shape> site_shapes(const NetworkGraph& g) { return g.dropout_site_shapes(); }

MaskSet oracle_mask(const std::vector<Shape>& shapes, const DropoutConfig& cfg, std::uint64_t seed,
                    std::uint64_t draw) {
  MaskSet m;
  const auto key = derive_key(stream_key(seed, StreamDomain::dropout_mask) ^ kOracleMaskSalt, draw);
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    Tensor site(shapes[s], 1.0);
    if (cfg.rate() > 0.0) {
      CounterRng rng(derive_key(key, s));
      for (auto& v : site.data()) v = rng.uniform() < cfg.keep_probability() ? 1.0 : 0.0;
    }
    m.sites.push_back(std::move(site));
  }
  return m;
}

template <typename DrawFn>
OracleResult run_oracle(const NetworkGraph& g, const Tensor& x, const Tensor& v0, std::size_t draws,
                        std::uint64_t seed, std::size_t workers, DrawFn&& output_for) {
  if (draws < kMinOracleDraws) {
    throw Error(ErrorKind::argument, "oracle needs at least " + std::to_string(kMinOracleDraws) + " draws");
  }
  if (x.shape() != g.input_shape()) throw Error(ErrorKind::shape, "oracle input does not match model input");
  if (v0.shape() != x.shape()) throw Error(ErrorKind::shape, "noise variance does not match input shape");
  std::vector<double> sd(v0.size());
  for (std::size_t i = 0; i < sd.size(); ++i) {
    if (!(v0[i] >= 0.0) || !std::isfinite(v0[i])) throw Error(ErrorKind::numeric, "noise variance must be >= 0");
    sd[i] = std::sqrt(v0[i]);
  }
  const auto out_size = element_count(g.output_shape());
  const auto noise_key = stream_key(seed, StreamDomain::input_noise);
  const std::size_t chunks = (draws + kChunk - 1) / kChunk;
  std::vector<std::vector<Moments>> partial(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<Moments> acc(out_size);
    Tensor z = x;
    const auto end = std::min(draws, (c + 1) * kChunk);
    for (std::size_t d = c * kChunk; d < end; ++d) {
      CounterRng rng(derive_key(noise_key, d));
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + sd[i] * rng.normal();
      const Tensor y = output_for(z, d);
      for (std::size_t k = 0; k < out_size; ++k) acc[k].push(y[k]);
    }
    partial[c] = std::move(acc);
  });
  std::vector<Moments> total(out_size);
  for (const auto& p : partial) {
    for (std::size_t k = 0; k < out_size; ++k) total[k].merge(p[k]);
  }
  const auto shape = g.output_shape();
  OracleResult r{Tensor(shape), Tensor(shape), Tensor(shape), Tensor(shape), draws};
  const double n = static_cast<double>(draws);
  for (std::size_t k = 0; k < out_size; ++k) {
    const double var = total[k].m2 / n;
    const double m4 = total[k].m4 / n;
    r.mean[k] = total[k].mean;
    r.var[k] = var;
    r.mean_stderr[k] = std::sqrt(var / n);
    r.var_stderr[k] = std::sqrt(std::max(0.0, m4 - var * var) / n);
  }
  return r;
}

}  // namespace

OracleResult mc_input_noise_oracle(const NetworkGraph& g, const Tensor& x, const Tensor& v0, const MaskSet* mask,
                                   const DropoutConfig& cfg, std::size_t draws, std::uint64_t seed,
                                   std::size_t workers) {
  if (mask) check_mask(g, *mask);
  return run_oracle(g, x, v0, draws, seed, workers, [&](const Tensor& z, std::size_t) {
    return mask ? forward_deterministic(g, z, *mask, cfg) : forward_deterministic(g, z);
  });
}

OracleResult mc_total_oracle(const NetworkGraph& g, const Tensor& x, const Tensor& v0, const DropoutConfig& cfg,
                             std::size_t draws, std::uint64_t seed, std::size_t workers) {
  const auto shapes = site_shapes(g);
  if (cfg.rate() == 0.0) {
    return run_oracle(g, x, v0, draws, seed, workers,
                      [&](const Tensor& z, std::size_t) { return forward_deterministic(g, z); });
  }
  return run_oracle(g, x, v0, draws, seed, workers, [&](const Tensor& z, std::size_t d) {
    return forward_deterministic(g, z, oracle_mask(shapes, cfg, seed, d), cfg);
  });
}

namespace {

double rel_error(double value, double reference) {
  const double diff = std::abs(value - reference);
  if (diff == 0.0) return 0.0;
  if (reference == 0.0) return std::numeric_limits<double>::infinity();
  return diff / std::abs(reference);
}

}  // namespace

ComparisonReport compare(const Tensor& mean, const Tensor& var, const OracleResult& oracle, double tol_mean,
                         double tol_var) {
  if (mean.shape() != oracle.mean.shape() || var.shape() != oracle.var.shape()) {
    throw Error(ErrorKind::shape, "compare: estimate and oracle shapes differ");
  }
  ComparisonReport rep;
  rep.tol_mean = tol_mean;
  rep.tol_var = tol_var;
  // Resolution floor: a unit that never varies in N draws reports stderr 0,
  // while ADF never goes below kVarFloor.
  const double floor_se = std::sqrt(kVarFloor / static_cast<double>(std::max<std::size_t>(oracle.draws, 1)));
  for (std::size_t i = 0; i < mean.size(); ++i) {
    ComponentComparison c;
    c.index = i;
    c.mean = mean[i];
    c.oracle_mean = oracle.mean[i];
    c.mean_rel_error = rel_error(c.mean, c.oracle_mean);
    c.mean_ok = std::abs(c.mean - c.oracle_mean) <=
                std::max(tol_mean * std::abs(c.oracle_mean), 3.0 * std::max(oracle.mean_stderr[i], floor_se));
    c.var = var[i];
    c.oracle_var = oracle.var[i];
    c.var_rel_error = rel_error(c.var, c.oracle_var);
    c.var_ok = std::abs(c.var - c.oracle_var) <=
               std::max({tol_var * std::abs(c.oracle_var), 3.0 * oracle.var_stderr[i], kVarFloor});
    if (c.mean_rel_error > rep.max_mean_rel_error) {
      rep.max_mean_rel_error = c.mean_rel_error;
      rep.worst_mean_index = i;
    }
    if (c.var_rel_error > rep.max_var_rel_error) {
      rep.max_var_rel_error = c.var_rel_error;
      rep.worst_var_index = i;
    }
    rep.passed = rep.passed && c.mean_ok && c.var_ok;
    rep.components.push_back(c);
  }
  return rep;
}

ComparisonReport compare(const GaussianActivation& adf, const OracleResult& oracle, double tol_mean, double tol_var) {
  return compare(adf.mean, adf.var, oracle, tol_mean, tol_var);
}

ComparisonReport compare(const UncertaintyEstimate& est, const OracleResult& oracle, double tol_mean,
                         double tol_var) {
  return compare(est.mean, est.sigma_tot, oracle, tol_mean, tol_var);
}

std::string ComparisonReport::to_json() const {
  using oj = nlohmann::ordered_json;
  auto num = [](double v) -> oj { return std::isfinite(v) ? oj(v) : oj(nullptr); };
  oj j;
  j["passed"] = passed;
  j["tol_mean"] = tol_mean;
  j["tol_var"] = tol_var;
  j["max_mean_rel_error"] = num(max_mean_rel_error);
  j["max_var_rel_error"] = num(max_var_rel_error);
  j["worst_mean_index"] = worst_mean_index;
  j["worst_var_index"] = worst_var_index;
  auto rows = oj::array();
  for (const auto& c : components) {
    oj row;
    row["index"] = c.index;
    row["mean"] = c.mean;
    row["oracle_mean"] = c.oracle_mean;
    row["mean_rel_error"] = num(c.mean_rel_error);
    row["mean_ok"] = c.mean_ok;
    row["var"] = c.var;
    row["oracle_var"] = c.oracle_var;
    row["var_rel_error"] = num(c.var_rel_error);
    row["var_ok"] = c.var_ok;
    rows.push_back(row);
  }
  j["components"] = rows;
  return j.dump();
}

}  // namespace uq
