#pragma once

// Splittable counter-based RNG. The whole experiment suite promises
// byte-identical outputs for a given seed, so the generator is pinned to a
// fixed algorithm (SplitMix64 core, Box-Muller for Gaussians) instead of
// std::mt19937, whose distributions are not portable across standard
// libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace miniopt::linalg {

namespace detail {

// SplitMix64 finalizer (Steele et al.); bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return detail::mix64(state_ += kGamma); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("SeededRng::uniform: lo > hi");
    return lo + (hi - lo) * next_double();
  }

  // Integer in [0, n). Rejection-sampled so the stream stays unbiased and
  // platform-independent.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("SeededRng::next_below: n == 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  // Derives an independent stream. Distinct indices give distinct child
  // seeds for a fixed parent: index * kGamma is a bijection (kGamma odd)
  // and mix64 is a bijection.
  SeededRng child(std::uint64_t index) const {
    return SeededRng(detail::mix64(seed_ ^ (0x5851f42d4c957f2dULL + index * kGamma)));
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t seed_;
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace miniopt::linalg
