#pragma once

#include <cstdint>
#include <span>

namespace pseg {

// Deterministic random stream with substream derivation.
//
// split(key) derives a child stream from the parent's *seed*, not from its
// consumption state, so per-trial streams are identical no matter how the
// parent was used or how trials are scheduled across workers. All samplers
// are self-contained (no std::distribution state), which keeps outputs
// bit-identical across runs.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  RandomStream split(std::uint64_t key) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform01();

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double gaussian();

  // Uniform on [-half_width, half_width].
  double uniform_symmetric(double half_width);

  // Index drawn proportionally to the given nonnegative weights.
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

// SplitMix64-style mixing used for seed derivation.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace pseg
