#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mep {

/// The only source of randomness in the library.
///
/// Engine: std::mt19937_64 seeded with the 64-bit seed. Its output sequence
/// is fixed by the C++ standard, so streams are identical on every platform.
/// uniform(): top 53 bits of one engine draw, times 2^-53, giving [0, 1).
/// normal():  Box-Muller cosine branch on two consecutive uniforms u1, u2:
///            sqrt(-2 ln(1 - u1)) * cos(2 pi u2). The sine branch is discarded
///            so every normal consumes exactly two engine draws.
/// std::normal_distribution is never used; its algorithm is implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mep
