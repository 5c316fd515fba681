#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace netscan {

__extension__ using uint128 = unsigned __int128;

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
// pure function of (counter, key), so any draw can be recomputed in isolation
// regardless of the order or thread in which draws are requested.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  static constexpr Key key_from_seed(std::uint64_t seed) noexcept {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

// 53-bit uniform in (0, 1]; never returns 0 so it is safe under log().
constexpr double uniform_open0(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

// 53-bit uniform in [0, 1).
constexpr double uniform_closed0(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return static_cast<double>(bits) * 0x1.0p-53;
}

// Standard normal draw from one Philox block (Box-Muller, cosine branch).
inline double normal_from_block(const Philox4x32::Counter& block) noexcept {
  const double u1 = uniform_open0(block[0], block[1]);
  const double u2 = uniform_closed0(block[2], block[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential stream over consecutive Philox counters, for places that only
// need reproducibility from a seed (shuffles, word sampling).
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(Philox4x32::key_from_seed(seed)), stream_(stream) {}

  std::uint64_t next_u64() noexcept {
    if (buffered_ == 0) {
      block_ = Philox4x32::generate(
          {static_cast<std::uint32_t>(position_), static_cast<std::uint32_t>(position_ >> 32),
           static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
          key_);
      ++position_;
      buffered_ = 2;
    }
    const std::size_t i = 2 - buffered_--;
    return (std::uint64_t{block_[2 * i]} << 32) | block_[2 * i + 1];
  }

  // Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t threshold = -bound % bound;
    for (;;) {
      const uint128 product = static_cast<uint128>(next_u64()) * bound;
      if (static_cast<std::uint64_t>(product) >= threshold) {
        return static_cast<std::uint64_t>(product >> 64);
      }
    }
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
  Philox4x32::Counter block_{};
  std::size_t buffered_ = 0;
};

}  // namespace netscan
