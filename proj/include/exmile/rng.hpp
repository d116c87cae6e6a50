#ifndef EXMILE_RNG_HPP
#define EXMILE_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "exmile/types.hpp"

namespace exm {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
///
/// Output is a pure function of (counter, key); there is no hidden state, so
/// any draw of any stream can be regenerated directly from its coordinates.
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Counter round(const Counter& c, const Key& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr Counter philox4x32_10(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    c = round(c, k);
  }
  return c;
}

}  // namespace philox

// Domain tags occupy the top byte of a stream id so that the streams used by
// different subsystems can never collide.
enum class StreamDomain : std::uint64_t {
  Fragment = 0x01,
  Resample = 0x02,
  LongTrajectory = 0x03,
  Landscape = 0x04,
  ChainPath = 0x05,
  Misc = 0x06,
};

constexpr std::uint64_t make_stream_id(StreamDomain domain, std::uint64_t index) {
  return (static_cast<std::uint64_t>(domain) << 56) | (index & ((std::uint64_t{1} << 56) - 1));
}

/// One independent random stream. Draw number `counter` of stream
/// `(seed, stream_id)` is philox(counter_lo, counter_hi, id_lo, id_hi; seed).
/// Each draw method consumes exactly one cipher block.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0)
      : seed_(seed), stream_id_(stream_id), counter_(counter) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  philox::Counter next_block() {
    const philox::Counter c{static_cast<std::uint32_t>(counter_),
                            static_cast<std::uint32_t>(counter_ >> 32),
                            static_cast<std::uint32_t>(stream_id_),
                            static_cast<std::uint32_t>(stream_id_ >> 32)};
    const philox::Key k{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    ++counter_;
    return philox::philox4x32_10(c, k);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    const auto b = next_block();
    return to_unit(b[0], b[1]);
  }

  /// Uniform on the open interval (lo, hi); rejects the (measure-zero) lo endpoint.
  double uniform_open(double lo, double hi) {
    for (;;) {
      const double u = uniform();
      if (u > 0.0) return lo + (hi - lo) * u;
    }
  }

  std::uint64_t uniform_index(std::uint64_t n) {
    const auto value = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return value < n ? value : n - 1;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Two independent standard normals from one block (Box-Muller).
  Vec2 normal2() {
    const auto b = next_block();
    const double u1 = 1.0 - to_unit(b[0], b[1]);  // (0, 1]
    const double u2 = to_unit(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  static double to_unit(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(a >> 5) << 26) | (b >> 6);
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
};

}  // namespace exm

#endif  // EXMILE_RNG_HPP
