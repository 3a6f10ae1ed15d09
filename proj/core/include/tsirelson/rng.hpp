#pragma once

#include <array>
#include <cstdint>

namespace tsirelson {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// SplitMix64 finalizer; used to derive child stream identifiers.
std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;

/**
 * Counter-based random stream.
 *
 * The pair (seed, stream_id) selects a Philox key/counter lane; the n-th
 * draw is a pure function of (seed, stream_id, n). Distinct stream ids give
 * independent streams, so a path indexed by i can be regenerated on any
 * worker without replaying the others.
 */
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Independent child stream; same inputs always give the same child.
  RngStream split(std::uint64_t child) const noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Standard normal draw (Box-Muller on two uniforms, pairs cached).
  double normal() noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tsirelson
