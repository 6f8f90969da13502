#pragma once

#include <cstdint>
#include <random>

#include "dialbench/tensor.hpp"

namespace dialbench {

/// Deterministic random source. Wraps mt19937_64 (whose output sequence is
/// fixed by the standard) and applies its own value transforms, so identical
/// seeds give identical draws on every platform and toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0,1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * kInv53;
  }

  /// Uniform in the open interval (0,1); safe to feed into log().
  double uniform_open() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * kInv53;
  }

  /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double normal() {
    double u1 = uniform_open();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Uniform integer in [0, n). Rejection-sampled to stay unbiased.
  std::uint64_t uniform_int(std::uint64_t n);

  Tensor normal_tensor(std::vector<int> shape);
  Tensor uniform_open_tensor(std::vector<int> shape);

  /// Independent child stream keyed by `stream`; the parent state is unused.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

 private:
  static constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  static constexpr double kPi = 3.14159265358979323846;

  std::mt19937_64 gen_;
};

/// splitmix64 finalizer; used to spread seeds across streams.
std::uint64_t mix64(std::uint64_t x);

}  // namespace dialbench
