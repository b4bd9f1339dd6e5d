#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace uwqc {

/// Counter-based random source. A value is a pure function of
/// (key, counter), so draws can be made in any order or in parallel and
/// still reproduce. Keys are derived by splitting on integers or names.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) noexcept : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  constexpr CounterRng split(std::uint64_t stream) const noexcept {
    return CounterRng(key_, mix(stream + 0x9e3779b97f4a7c15ULL));
  }
  constexpr CounterRng split(std::string_view name) const noexcept { return split(fnv1a(name)); }

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix(key_ ^ mix(counter * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  }

  /// Uniform on the open interval (0, 1).
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on counters 2c and 2c+1.
  double normal(std::uint64_t counter) const noexcept {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Poisson draw by inversion (small means only).
  std::uint64_t poisson(double mean, std::uint64_t counter) const noexcept {
    if (mean <= 0.0) return 0;
    const double u = uniform(counter);
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 10000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  constexpr CounterRng(std::uint64_t parent, std::uint64_t salt) noexcept : key_(mix(parent ^ salt)) {}

  static constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t key_;
};

}  // namespace uwqc
