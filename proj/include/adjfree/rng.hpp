#pragma once

#include <array>
#include <cstdint>

namespace adjfree {

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit seed is the key; the 128-bit counter is split into the stream
/// id (high half) and a block index (low half). Every (seed, stream) pair is
/// an independent substream, and the output depends only on integer
/// arithmetic, so sequences are bit-identical across platforms.
///
/// Normal variates use the Box-Muller transform and therefore go through
/// std::log / std::sqrt / std::cos / std::sin; those are the only places where
/// a non-conforming libm could change the last bits.
class RngState {
 public:
  RngState() = default;
  RngState(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  /// Number of 128-bit blocks consumed so far.
  std::uint64_t block_index() const noexcept { return block_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1), never exactly zero.
  double uniform_open();
  /// Uniform integer in [0, n), unbiased (Lemire's multiply-and-reject).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  /// ±1 with equal probability.
  double sign();

  /// A fresh state for a derived substream; used to hand independent streams
  /// to parallel blocks of work without consuming this state.
  RngState substream(std::uint64_t child) const;

  friend bool operator==(const RngState&, const RngState&) = default;

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Raw Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive substream ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace adjfree
