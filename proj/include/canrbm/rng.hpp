// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "canrbm/errors.hpp"

namespace canrbm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed, so parallel shards
/// (per-sample, per-class, per-epoch) get decorrelated sequences.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// mt19937_64 with hand-rolled value transforms. The engine output is pinned by
// the standard, and avoiding std distributions keeps sequences identical
// across standard library implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Unbiased uniform index in [0, n). Requires n >= 1.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw ValidationError("uniform_index: empty range");
    const std::uint64_t span = n;
    const std::uint64_t rej =
        (std::numeric_limits<std::uint64_t>::max() % span + 1) % span;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x < rej);
    return static_cast<std::size_t>(x % span);
  }

  /// Integer uniform in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform_index(static_cast<std::size_t>(hi - lo + 1)));
  }

  /// Standard normal via Box-Muller, spare value cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Deterministic Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, SeededRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng.uniform_index(i)]);
  }
}

}  // namespace canrbm
