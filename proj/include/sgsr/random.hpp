#pragma once

#include <cstdint>
#include <random>

namespace sgsr {

/// Seeded generator with library-independent draws (std distributions are
/// implementation-defined, so uniforms are built from raw 64-bit output).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n ? engine_() % n : 0; }
  /// Standard normal via Box-Muller.
  double normal();

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Seed mixing for derived streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sgsr
