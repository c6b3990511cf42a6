#pragma once

#include <cstdint>
#include <random>

namespace fermikac {

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of replica `r` under master seed `master`:
///   seed_r = splitmix64(master ^ splitmix64(r + 0x9E3779B97F4A7C15)).
/// Replica r's stream does not depend on how many replicas exist, so replica
/// sets can be extended without re-running earlier ones.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t r) noexcept;

/// Random stream owned by one simulation replica. Variate conversions are done
/// here rather than through <random> distributions so that sequences are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Lemire's nearly-divisionless method.
  std::uint64_t index(std::uint64_t n);

  /// Exponential with the given rate (> 0).
  double exponential(double rate);

  /// Standard normal (Marsaglia polar method).
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fermikac
