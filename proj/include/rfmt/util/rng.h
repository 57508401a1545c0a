#pragma once

#include <cstdint>
#include <random>

namespace rfmt {

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream seed for item `index` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// mt19937_64 with platform-independent uniform draws (the std distributions
// are implementation-defined, which would break cross-platform determinism).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  // Box-Muller standard normal.
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace rfmt
