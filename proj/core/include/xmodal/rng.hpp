#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace xmodal {

/// SplitMix64 finaliser; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based random stream: draw i of stream (seed, key) is a pure
/// function of (seed, key, i), so independent streams never share state and
/// results do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t key = 0) noexcept
      : base_(mix64(seed ^ mix64(key + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() noexcept { return mix64(base_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  bool coin() noexcept { return (next_u64() >> 63) != 0; }

  /// Standard normal via Box-Muller (one value per call).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Derive an independent child stream.
  [[nodiscard]] Rng fork(std::uint64_t key) noexcept { return Rng(next_u64(), key); }

  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

  struct State {
    std::uint64_t base = 0;
    std::uint64_t counter = 0;
  };
  [[nodiscard]] State state() const noexcept { return {base_, counter_}; }
  static Rng from_state(State s) noexcept {
    Rng r(0);
    r.base_ = s.base;
    r.counter_ = s.counter;
    return r;
  }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace xmodal
