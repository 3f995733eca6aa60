#include "redcliff/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace redcliff {

std::uint64_t Rng::next_u64() {
  // SplitMix64 (Steele, Lea, Flood 2014).
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian(double mean, double std) {
  if (std < 0.0) throw std::invalid_argument("gaussian: negative std");
  // Box-Muller; u1 shifted away from 0 so log stays finite.
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return mean + std * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
  // Rejection-free modulo is biased for huge n; every n used here is tiny.
  return next_u64() % n;
}

Rng Rng::fork(std::uint64_t tag) const {
  Rng child(state_ ^ (0xA0761D6478BD642FULL * (tag + 1)));
  child.next_u64();
  return child;
}

}  // namespace redcliff
