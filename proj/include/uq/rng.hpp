#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace uq {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive a stream key from a parent key and an index. Used to key every
/// random stream by (seed, sample, site) so that results never depend on
/// the order in which work is scheduled.
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(parent ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Stream domains, so that noise and mask streams never alias.
enum class StreamDomain : std::uint64_t {
  dropout_mask = 0x6d61736b,
  input_noise = 0x6e6f6973,
  softmax_draw = 0x736f6674,
  synthetic = 0x73796e74,
};

constexpr std::uint64_t stream_key(std::uint64_t seed, StreamDomain domain) noexcept {
  return derive_key(seed, static_cast<std::uint64_t>(domain));
}

/// Counter-based generator: output i of a stream is mix64(key + i * golden).
/// Results are a pure function of (key, position) and therefore identical
/// across runs, platforms and thread schedules.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key, std::uint64_t position = 0) noexcept
      : key_(key), counter_(position) {}

  constexpr std::uint64_t next_u64() noexcept {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * (counter_++));
  }

  /// Uniform in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Bernoulli(p) draw; true with probability p.
  constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace uq
