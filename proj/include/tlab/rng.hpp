#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "tlab/tensor.hpp"

namespace tlab {

// xoshiro256** seeded by expanding the 64-bit seed with SplitMix64.
//
// The integer stream is bit-exact on every platform. Uniform doubles take the
// top 53 bits. Normal deviates use the Marsaglia polar method and cache the
// second deviate of each pair; their last bit depends on the platform's log().
//
// Single owner: not safe for concurrent use.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  // Independent generator for (seed, stream) so that consumers of one stream
  // never shift the draws seen by another.
  static SeededRng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p);
  double normal();

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t& x);

// I.i.d. N(mean, variance) draws. Zero variance yields the constant mean and
// consumes no randomness.
Tensor normal_sample(SeededRng& rng, const Shape& shape, double mean, double variance);

}  // namespace tlab
