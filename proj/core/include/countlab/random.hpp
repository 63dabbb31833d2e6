#pragma once

#include <cstdint>
#include <random>

namespace countlab {

// Seeded stream used everywhere randomness is needed. The engine is
// std::mt19937_64, whose output sequence is fixed by the standard; the
// real/integer mappings are done here rather than through <random>
// distributions so results are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0, without modulo bias.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent child seed from a parent seed and a stream tag
// (splitmix64 finalizer over the combination).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);

}  // namespace countlab
