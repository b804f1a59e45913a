#pragma once

#include <array>
#include <cstdint>

namespace sieve {

/// Philox4x32-10 block function: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Counter-based random stream. The pair (seed, stream_id) fully determines
/// the output sequence on every platform; streams are cheap to create, so
/// parallel work derives one stream per task instead of sharing state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  /// Independent stream for task `index`, a pure function of (seed, stream_id, index).
  RngStream substream(std::uint64_t index) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform();
  /// Standard normal by Box-Muller; variates are produced in pairs.
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sieve
