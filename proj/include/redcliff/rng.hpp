#pragma once

#include <cstdint>

namespace redcliff {

/// Deterministic counter-style generator (SplitMix64). The integer stream is
/// exact on every platform; uniform doubles are derived from the top 53 bits,
/// Gaussians via Box-Muller on consecutive uniform pairs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// N(mean, std^2) sample; std must be >= 0. Consumes exactly two uniforms.
  double gaussian(double mean, double std);

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Independent child stream; distinct tags give decorrelated streams.
  Rng fork(std::uint64_t tag) const;

  std::uint64_t seed_state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace redcliff
