#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace imchaos {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (counter, key), so any draw can be reproduced without
/// replaying the stream.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// Standard-normal stream keyed by (global seed, stream id). Draw i of the
/// stream lives in Philox block i/2, so two streams never share blocks and
/// the result does not depend on which thread consumes the stream.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream_id) {}

  std::uint64_t stream_id() const noexcept { return stream_; }
  std::uint64_t position() const noexcept { return next_; }

  double operator()() noexcept {
    const std::uint64_t i = next_++;
    if ((i & 1u) == 1u && cached_block_ == (i >> 1)) return cached_;
    const auto pair = pair_at(i >> 1);
    cached_block_ = i >> 1;
    cached_ = pair[1];
    return pair[i & 1u];
  }

  /// Random access to draw `index` of this stream.
  double at(std::uint64_t index) const noexcept { return pair_at(index >> 1)[index & 1u]; }

  /// Uniform on (0,1) taken from a separate counter lane of the same stream.
  double uniform(std::uint64_t index) const noexcept {
    const auto out = block(index, 1u);
    return to_open_unit((std::uint64_t{out[1]} << 32) | out[0]);
  }

 private:
  Philox4x32::Counter block(std::uint64_t b, std::uint32_t lane) const noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(b),
                                  static_cast<std::uint32_t>(b >> 32) ^ (lane << 31),
                                  static_cast<std::uint32_t>(stream_),
                                  static_cast<std::uint32_t>(stream_ >> 32)};
    return Philox4x32::generate(ctr, key_);
  }

  static double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<double, 2> pair_at(std::uint64_t b) const noexcept {
    const auto out = block(b, 0u);
    const double u1 = to_open_unit((std::uint64_t{out[1]} << 32) | out[0]);
    const double u2 = to_open_unit((std::uint64_t{out[3]} << 32) | out[2]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t next_ = 0;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  double cached_ = 0.0;
};

}  // namespace imchaos
