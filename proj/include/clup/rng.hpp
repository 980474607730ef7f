#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace clup::rng {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used as a stateless
// counter-based generator: every draw is a pure function of (key, counter),
// so results never depend on evaluation order or thread count.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds `value` into `key`; order-sensitive.
constexpr std::uint64_t mix(std::uint64_t key, std::uint64_t value) noexcept {
  return splitmix64(key ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

/// Uniform on the open interval (0, 1), 53-bit resolution.
constexpr double uniform_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Counter-based stream: draw i of stream `key`.
class CounterStream {
 public:
  constexpr explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return splitmix64(key_ ^ splitmix64(2 * counter + 1));
  }

  // Box-Muller on two independent words derived from the same counter.
  double normal(std::uint64_t counter) const {
    const double u1 = uniform_open(bits(counter));
    const double u2 = uniform_open(splitmix64(bits(counter) ^ 0xd1b54a32d192ed03ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool coin(std::uint64_t counter) const noexcept { return (bits(counter) >> 63) != 0; }

 private:
  std::uint64_t key_;
};

}  // namespace clup::rng
