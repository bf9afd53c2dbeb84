#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace osda {

/// Seedable generator used everywhere randomness is needed.
///
/// The bit stream is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. Real and normal variates are derived here rather than through
/// <random> distributions (whose algorithms are implementation-defined), so a
/// seed yields the same numbers with any conforming standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), by rejection so there is no modulo bias.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `name`.
std::uint64_t fnv1a64(std::string_view name) noexcept;

/// Per-stage seed derived from a global seed and a stage name.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) noexcept;

}  // namespace osda
