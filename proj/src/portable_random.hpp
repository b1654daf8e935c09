#pragma once

// Platform-independent draws; std::uniform_real_distribution and
// std::normal_distribution are implementation-defined.

#include <cmath>
#include <numbers>
#include <random>

namespace alma::rnd {

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit_uniform(rng);  // (0, 1]
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace alma::rnd
