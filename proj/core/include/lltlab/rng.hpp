#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace lltlab {

/// Counter-based pseudorandom generator (Philox-4x64, 10 rounds).
///
/// Streams are addressed by (seed, stream): the key is (seed, stream) and the
/// 256-bit counter enumerates blocks. Disjoint streams are statistically
/// independent, so simulations can hand one stream per path and stay
/// reproducible regardless of scheduling.
class PhiloxRng {
 public:
  static constexpr const char* kName = "philox4x64-10";

  PhiloxRng(std::uint64_t seed, std::uint64_t stream = 0);

  /// The keyed bijection itself; exposed for known-answer tests.
  static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> counter,
                                            std::array<std::uint64_t, 2> key);

  std::uint64_t next_u64();

  /// Uniform on [0,1) with 53 random bits.
  double next_double();

  /// Uniform on (0,1]; safe to pass to log().
  double next_double_open();

  /// Exponential with the given rate (> 0).
  double exponential(double rate);

  /// Standard normal (Box-Muller; consumes two uniforms every other call).
  double normal();

 private:
  void refill();

  std::array<std::uint64_t, 2> key_;
  std::array<std::uint64_t, 4> counter_;
  std::array<std::uint64_t, 4> buffer_;
  int index_;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace lltlab
