#pragma once

#include <cstddef>
#include <cstdint>

namespace sapda {

/// SplitMix64 used as a counter-based generator: the n-th output is
/// mix(key + n * 0x9E3779B97F4A7C15) with the Stafford "Mix13" finalizer
/// (shifts 30/27/31, multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB).
/// Output depends only on (key, counter), so streams are reproducible across
/// platforms and can be forked without shared state.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  std::uint64_t next() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by rejection, n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Standard normal via Box-Muller; the second variate is discarded so the
  /// stream position never depends on call history.
  double normal() noexcept;

  /// Independent stream derived from this key and a label.
  Rng fork(std::uint64_t label) const noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace sapda
