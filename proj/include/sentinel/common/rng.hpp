#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sentinel {

/// Derives an independent stream seed from (run seed, stream name), so that
/// adding a node never perturbs the draws of another.
std::uint64_t stream_seed(std::uint64_t run_seed, std::string_view stream);

/// Portable PRNG: mt19937_64 is bit-specified by the standard, and the
/// real-valued conversions below avoid <random> distributions, whose output
/// differs between standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sentinel
