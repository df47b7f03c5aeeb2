#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace rest {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random source with platform-independent derived draws.
///
/// std::mt19937_64's raw output is fixed by the standard, but the standard
/// distributions are not; everything here is derived by hand from raw words so
/// that a seed reproduces the same stream on every toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0)
      : engine_(splitmix64(seed)), seed_mix_(splitmix64(seed ^ 0xd1b54a32d192ed03ULL)) {}

  /// Independent child stream, e.g. one per training step.
  Rng derive(std::uint64_t stream) const {
    return Rng(splitmix64(seed_mix_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL)), Tag{});
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard Gumbel(0, 1) draw.
  double gumbel() { return -std::log(-std::log(uniform_open())); }

  /// Draw from a categorical distribution given by (not necessarily normalized) weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double target = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      target -= weights[i];
      if (target < 0.0) return i;
    }
    // Rounding can leave a sliver at the end; return the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0.0) return i;
    return weights.size() - 1;
  }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  struct Tag {};
  Rng(std::uint64_t mixed, Tag) : engine_(mixed), seed_mix_(mixed) {}

  std::mt19937_64 engine_;
  std::uint64_t seed_mix_;
};

}  // namespace rest
