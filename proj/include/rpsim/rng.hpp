#pragma once

#include <cstdint>
#include <span>

#include "rpsim/types.hpp"

namespace rpsim {

// Counter-based splittable RNG (SplitMix64): a Weyl sequence through a
// 64-bit mixer.  Streams keyed by (master seed, trajectory index) are
// independent of worker count, which is the reproducibility contract of the
// ensemble code.
class SplitMix64 {
 public:
  using result_type = uint64_t;

  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  static constexpr uint64_t min() { return 0; }
  static constexpr uint64_t max() { return ~uint64_t{0}; }

  uint64_t operator()() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

  // Exponential waiting time with the given rate.
  double exponential(double rate) {
    double u = uniform();
    return -std::log1p(-u) / rate;
  }

  // Index sampled from unnormalized nonnegative weights.
  std::size_t discrete(std::span<const double> weights);

 private:
  uint64_t state_;
};

inline SplitMix64 stream_for(uint64_t master_seed, uint64_t index) {
  // One extra mix decorrelates consecutive indices.
  SplitMix64 mixer(master_seed + 0x9E3779B97F4A7C15ULL * (index + 1));
  return SplitMix64(mixer());
}

}  // namespace rpsim
