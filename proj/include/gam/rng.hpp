#pragma once

#include <cstdint>
#include <random>

namespace gam {

/// Deterministic random source. mt19937_64 output is pinned by the standard,
/// and the derived draws below avoid std::uniform_*_distribution, whose
/// results differ between standard library implementations. Identical seeds
/// therefore give identical streams everywhere, which the seeded traces and
/// sweep reproducibility rely on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Derives a stream-separated seed (splitmix64 finalizer over seed ^ stream).
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gam
