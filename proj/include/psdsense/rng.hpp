#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace psdsense {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is identified by (seed, stream): the 64-bit seed is the key, the
/// 64-bit stream id fills the upper half of the 128-bit counter and the lower
/// half counts blocks. Streams with different ids never overlap, so every
/// generated object draws from its own substream and can be regenerated in
/// isolation.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream) : key_{lo(seed), hi(seed)}, stream_(stream) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t a = next_u32();
    const std::uint64_t b = next_u32();
    return (a << 32) | b;
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t uniform_int(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

 private:
  static std::uint32_t lo(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
  static std::uint32_t hi(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

  void refill() {
    block_ = block({lo(counter_), hi(counter_), lo(stream_), hi(stream_)}, key_);
    ++counter_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stream ids: the high 32 bits name what is being drawn, the low 32 bits
/// index it (e.g. measurement matrix i).
enum class StreamTag : std::uint32_t {
  sensing = 1,
  ground_truth = 2,
  rip_probe = 3,
  init = 4,
  fallback = 5,
  null_space = 6,
};

inline std::uint64_t stream_id(StreamTag tag, std::uint64_t index) {
  return (static_cast<std::uint64_t>(tag) << 32) | (index & 0xFFFFFFFFu);
}

/// Per-trial seed derived from a base seed; trials never share streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  auto out = Philox::block({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                            0x7472u, 0x6961u},
                           {static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32)});
  return (std::uint64_t{out[0]} << 32) | out[1];
}

}  // namespace psdsense
