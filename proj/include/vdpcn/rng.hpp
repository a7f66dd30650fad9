#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "vdpcn/types.hpp"

namespace vdpcn {

// Seeded generator with distributions defined here rather than by the
// standard library, so sequences are identical across toolchains.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

  double normal()
  {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector3 unit_vector()
  {
    Vector3 v;
    do {
      v = Vector3(normal(), normal(), normal());
    } while (v.norm() < 1e-12);
    return v.normalized();
  }

  template <typename It> void shuffle(It first, It last)
  {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      const auto j = static_cast<decltype(i)>(below(static_cast<std::uint64_t>(i) + 1));
      std::swap(first[i], first[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

} // namespace vdpcn
