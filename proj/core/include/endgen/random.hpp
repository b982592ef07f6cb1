#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "endgen/tensor.hpp"

namespace endgen {

/// Mixes a base seed with stream indices (splitmix64 finalizer), so that
/// per-step / per-example streams are reproducible without stored state.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Seeded generator with platform-independent draws (std::mt19937_64 bits,
/// our own conversion to reals; the std distributions are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Index drawn proportionally to `weights` (need not be normalized).
  std::size_t categorical(std::span<const Real> weights);

 private:
  std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by Rng.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.index(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace endgen
