#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace dpsco {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// Every draw is a pure function of (key, counter), so streams can be
/// addressed by coordinates such as (stream id, step, coordinate) instead
/// of by sequence position. Two runs that share a key see the same value
/// at the same address no matter how many other addresses they touch.
class Philox {
 public:
  using Counter = std::array<std::uint32_t, 4>;

  explicit constexpr Philox(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr Counter operator()(Counter ctr) const noexcept {
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  std::array<std::uint32_t, 2> key_;
};

/// Named sub-streams of one seeded generator.
enum class Stream : std::uint32_t {
  kBatchIndex = 1,
  kNoise = 2,
  kData = 3,
  kInit = 4,
};

/// Addressable random source: each (stream, a, b) address yields fixed bits.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) noexcept : philox_(seed) {}

  constexpr std::uint64_t bits(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept {
    const auto out = philox_({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), b,
                              static_cast<std::uint32_t>(stream)});
    return (std::uint64_t{out[0]} << 32) | out[1];
  }

  /// Uniform in the open interval (0, 1).
  double uniform(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept {
    return (static_cast<double>(bits(stream, a, b) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), Lemire multiply-shift.
  std::uint64_t index(Stream stream, std::uint64_t a, std::uint32_t b, std::uint64_t n) const noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(stream, a, b)) * n) >> 64);
  }

  /// Two independent standard normals (Box-Muller) from one block.
  std::array<double, 2> normal_pair(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept {
    const auto out = philox_({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), b,
                              static_cast<std::uint32_t>(stream)});
    const std::uint64_t w0 = (std::uint64_t{out[0]} << 32) | out[1];
    const std::uint64_t w1 = (std::uint64_t{out[2]} << 32) | out[3];
    const double u0 = (static_cast<double>(w0 >> 11) + 0.5) * 0x1.0p-53;
    const double u1 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u0));
    const double angle = 2.0 * std::numbers::pi * u1;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  double normal(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept {
    return normal_pair(stream, a, b)[0];
  }

 private:
  Philox philox_;
};

/// Derives an independent child seed, e.g. for the test split of a dataset.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace dpsco
