#pragma once

#include <cstdint>

namespace authorgan {

/// Counter-based random stream.
///
/// Draw i of a stream seeded with s is splitmix64(s + (i + 1) * 0x9E3779B97F4A7C15),
/// i.e. the SplitMix64 finalizer applied to a Weyl sequence. Uniforms take the
/// top 53 bits; normals use the Box-Muller cosine branch and consume exactly two
/// draws each. Only integer arithmetic plus std::log/std::cos/std::sqrt are
/// involved, so a seed reproduces the same sequence on any IEEE-754 platform
/// with a correctly rounded libm.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t draws() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  /// Uniform in (0, 1].
  double uniform_open_low() noexcept;
  double normal() noexcept;
  /// Uniform integer in [0, bound). bound must be nonzero.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Independent child stream; consumes one draw from this stream.
  RngStream split() noexcept { return RngStream(next_u64()); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace authorgan
