#pragma once

// Seeded random streams. Every sampler takes an explicit Rng so that runs
// are reproducible from a single 64-bit master seed.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rateagg {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for stream (a, b) of `master`:
///   mix64(mix64(mix64(master) ^ a) ^ b)
/// Distinct (a, b) pairs give statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(master) ^ a) ^ b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Gamma(shape, 1).
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

  /// Zero-based index drawn from unnormalized nonnegative weights by
  /// inverse CDF on the cumulative sum.
  std::size_t categorical(std::span<const double> weights);

  /// Dirichlet(params) as normalized Gamma draws; writes into `out`.
  void dirichlet(std::span<const double> params, std::span<double> out);
  std::vector<double> dirichlet(std::span<const double> params);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rateagg
