#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace pudefect {

// Derives an independent sub-seed from (seed, stage, index). Every stochastic
// component of the toolkit gets its randomness through this function, so one
// master seed reproduces a whole experiment regardless of execution order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage,
                          std::uint64_t index = 0);

// Seeded generator. The engine is mt19937_64 (fully specified by the
// standard); every distribution is implemented here rather than taken from
// <random>, whose distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in (0, 1).
  double uniform_open();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  /// Gamma(shape, 1), Marsaglia-Tsang with the shape < 1 boost.
  double gamma(double shape);
  /// Beta(a, b) from two gamma draws.
  double beta(double a, double b);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Fisher-Yates over the whole range.
template <typename T>
void shuffle(std::span<T> values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(values[i - 1], values[j]);
  }
}

// Partial Fisher-Yates: returns `count` distinct indices from [0, n), in draw
// order. count must be <= n.
std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t count,
                                                    Rng& rng);

// Identity permutation of length n, shuffled.
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

}  // namespace pudefect
