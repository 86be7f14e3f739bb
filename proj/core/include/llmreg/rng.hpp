#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace llmreg {

// Deterministic, platform-independent randomness. The std:: distributions are
// implementation-defined, so every sample the pipeline draws goes through this
// generator instead (xoshiro256** seeded via splitmix64). Reruns with the same
// seed must produce byte-identical artifacts on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_double();

  // Standard normal via Box-Muller (caches the second deviate).
  double next_gaussian();

  // Uniform integer in [0, bound), rejection-sampled (no modulo bias).
  std::uint64_t next_below(std::uint64_t bound);

  // k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t state_[4];
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

// Stable seed derivation for sub-streams: mixes the parts into the master
// seed so that (seed, setting, run) streams are independent but reproducible.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts);

}  // namespace llmreg
