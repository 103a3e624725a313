#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (master seed, stream id, purpose, block index), so trajectories can be
// scheduled on any worker, in any batch, and still see identical noise.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>

namespace mmtwa {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace detail

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline Philox4x32Counter philox4x32(Philox4x32Counter ctr, Philox4x32Key key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(detail::kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(detail::kPhiloxM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

namespace detail {

inline constexpr double kLn2 = 0.693147180559945309417232121458176568;
inline constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
inline constexpr double kHalfPi = 1.57079632679489661923132169163975144;
inline constexpr double kInvSqrt2 = 0.707106781186547524400844362104849039;

/// Natural log for positive normal doubles. Branch-free so loops calling it
/// auto-vectorize; absolute error below 1e-15 on (0, 1].
inline double fast_log(double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  auto exponent = static_cast<std::int64_t>(bits >> 52) - 1023;
  double m = std::bit_cast<double>((bits & 0x000FFFFFFFFFFFFFull) | 0x3FF0000000000000ull);
  const bool upper = m > kSqrt2;
  m *= upper ? 0.5 : 1.0;
  exponent += upper ? 1 : 0;
  // log m = 2 atanh(s), |s| <= 0.1716
  const double s = (m - 1.0) / (m + 1.0);
  const double s2 = s * s;
  double p = 1.0 / 19.0;
  p = p * s2 + 1.0 / 17.0;
  p = p * s2 + 1.0 / 15.0;
  p = p * s2 + 1.0 / 13.0;
  p = p * s2 + 1.0 / 11.0;
  p = p * s2 + 1.0 / 9.0;
  p = p * s2 + 1.0 / 7.0;
  p = p * s2 + 1.0 / 5.0;
  p = p * s2 + 1.0 / 3.0;
  p = p * s2 + 1.0;
  return static_cast<double>(exponent) * kLn2 + 2.0 * s * p;
}

/// cos and sin of 2*pi*u for u in [0, 1). Branch-free; error below 1e-15.
inline void sincos_turns(double u, double& c, double& s) {
  const double t = 4.0 * u;
  const auto quadrant = static_cast<std::int64_t>(t);
  const double psi = (t - static_cast<double>(quadrant) - 0.5) * kHalfPi;  // [-pi/4, pi/4)
  const double p2 = psi * psi;
  double sp = -1.0 / 1307674368000.0;        // -1/15!
  sp = sp * p2 + 1.0 / 6227020800.0;         //  1/13!
  sp = sp * p2 - 1.0 / 39916800.0;           // -1/11!
  sp = sp * p2 + 1.0 / 362880.0;             //  1/9!
  sp = sp * p2 - 1.0 / 5040.0;               // -1/7!
  sp = sp * p2 + 1.0 / 120.0;                //  1/5!
  sp = sp * p2 - 1.0 / 6.0;                  // -1/3!
  sp = psi + psi * p2 * sp;
  double cp = 1.0 / 20922789888000.0;        //  1/16!
  cp = cp * p2 - 1.0 / 87178291200.0;        // -1/14!
  cp = cp * p2 + 1.0 / 479001600.0;          //  1/12!
  cp = cp * p2 - 1.0 / 3628800.0;            // -1/10!
  cp = cp * p2 + 1.0 / 40320.0;              //  1/8!
  cp = cp * p2 - 1.0 / 720.0;                // -1/6!
  cp = cp * p2 + 1.0 / 24.0;                 //  1/4!
  cp = cp * p2 - 0.5;                        // -1/2!
  cp = 1.0 + p2 * cp;
  // angle = quadrant * pi/2 + pi/4 + psi
  const double c0 = (cp - sp) * kInvSqrt2;
  const double s0 = (cp + sp) * kInvSqrt2;
  const bool odd = (quadrant & 1) != 0;
  const double sign = (quadrant & 2) != 0 ? -1.0 : 1.0;
  c = sign * (odd ? -s0 : c0);
  s = sign * (odd ? c0 : s0);
}

inline double to_open_unit(std::uint32_t x) { return (static_cast<double>(x) + 0.5) * 0x1p-32; }

}  // namespace detail

/// Four standard normals from one Philox block via Box-Muller.
inline void block_to_normals(const Philox4x32Counter& bits, double* out) {
  for (int pair = 0; pair < 2; ++pair) {
    const double r = std::sqrt(-2.0 * detail::fast_log(detail::to_open_unit(bits[2 * pair])));
    double c, s;
    detail::sincos_turns(detail::to_open_unit(bits[2 * pair + 1]), c, s);
    out[2 * pair] = r * c;
    out[2 * pair + 1] = r * s;
  }
}

/// Independent random stream families per trajectory.
enum class StreamPurpose : std::uint32_t { Initial = 0, Noise = 1, Synthetic = 2 };

inline Philox4x32Key philox_key(std::uint64_t master_seed) {
  return {static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)};
}

inline Philox4x32Counter philox_counter(std::uint64_t block, std::uint64_t stream, StreamPurpose purpose) {
  return {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
          static_cast<std::uint32_t>(stream),
          (static_cast<std::uint32_t>(purpose) << 24) ^ static_cast<std::uint32_t>(stream >> 32)};
}

/// Sequential view of one counter-based stream. Normals are produced four
/// per block; a request that is not a multiple of four discards the tail of
/// its last block so the next request starts on a fresh block.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream, StreamPurpose purpose)
      : key_(philox_key(master_seed)), stream_(stream), purpose_(purpose) {}

  std::uint64_t block() const { return block_; }
  void seek(std::uint64_t block) { block_ = block; }

  Philox4x32Counter next_bits() { return philox4x32(philox_counter(block_++, stream_, purpose_), key_); }

  void fill_normals(std::span<double> out) {
    double buf[4];
    std::size_t i = 0;
    while (i < out.size()) {
      block_to_normals(next_bits(), buf);
      for (int j = 0; j < 4 && i < out.size(); ++j) out[i++] = buf[j];
    }
  }

  double uniform() { return detail::to_open_unit(next_bits()[0]); }

 private:
  Philox4x32Key key_;
  std::uint64_t stream_;
  StreamPurpose purpose_;
  std::uint64_t block_ = 0;
};

}  // namespace mmtwa
