#pragma once

// Deterministic RNG plumbing shared by every module.
//
// All randomness in the project flows through Rng instances whose seeds are
// derived from (base seed, purpose tag, counter) via derive_seed.  Streams
// are therefore independent of call order across modules: the sampler
// drawing one extra batch cannot shift the environment's noise, which is
// what makes snapshot/resume and cross-backend runs reproducible.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace dbmrl {

// splitmix64 finalizer; decorrelates structured inputs.
std::uint64_t mix64(std::uint64_t x);

// Stable seed for a named stream: hashes the tag (FNV-1a) and mixes it with
// the base seed and a per-use counter.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t counter = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with exactly 53 random bits; bit-identical across
  // platforms, unlike std::uniform_real_distribution.
  double uniform01() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Index drawn from an unnormalized nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights);

  // mt19937_64 state as text (decimal words); used by checkpoints.
  std::string save_state() const;
  void load_state(const std::string& text);

 private:
  std::mt19937_64 eng_;
};

// Shortest decimal form that round-trips the double exactly.
std::string format_double(double v);

}  // namespace dbmrl
