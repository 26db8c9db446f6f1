#pragma once

#include <array>
#include <cstdint>

namespace blindlab {

// splitmix64 finalizer. Bijective 64-bit mixer used for all seed derivation.
std::uint64_t mix64(std::uint64_t x);

// Sub-seed for cell (a, b) of a run seeded with `base`:
//   mix64(mix64(base ^ 0x9E3779B97F4A7C15) + 0xD1B54A32D192ED03 * (a + 1)
//         + 0x8CB92BA72F3D8DD7 * (b + 1))
// A pure function of its arguments.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);

// xoshiro256** generator whose state is expanded from a 64-bit seed with
// splitmix64. The output sequence depends only on the seed, so runs replay
// bit-for-bit across platforms.
//
// A stream has a single owner. Independent streams for parallel consumers
// are obtained with split(tag), which seeds a fresh generator from
// derive_seed(seed(), tag, 0) without touching this stream's state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1): ((x >> 11) + 0.5) * 2^-53.
  double uniform01();

  // lo + (hi - lo) * uniform01(); strictly inside (lo, hi) when lo < hi.
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller. Variates are produced in pairs from two
  // consecutive uniform01() draws; the second of each pair is returned by
  // the next call.
  double normal();

  // Uniform integer in [0, bound), bound > 0 (Lemire's multiply-shift with
  // rejection).
  std::uint64_t below(std::uint64_t bound);

  // True with probability p.
  bool bernoulli(double p) { return uniform01() < p; }

  RngStream split(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace blindlab
