#pragma once

// Counter-based random number generation. Every random quantity in the
// simulator is addressed by (seed, agent, iteration, purpose, position), so
// any batch or decision can be regenerated in isolation, in any order, on any
// number of threads, without shared generator state.

#include <array>
#include <cmath>
#include <cstdint>

namespace fedgain {

// Philox 4x32, 10 rounds (Salmon et al., "Parallel random numbers: as easy
// as 1, 2, 3"). 128-bit counter, 64-bit key, 128 bits out per block.
namespace philox {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter round_once(const Counter& c, const Key& k) {
  const std::uint64_t p0 = std::uint64_t(kMul0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kMul1) * c[2];
  return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
          static_cast<std::uint32_t>(p1),
          static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
          static_cast<std::uint32_t>(p0)};
}

inline Counter block(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    c = round_once(c, k);
  }
  return c;
}

}  // namespace philox

// Sub-stream tags. Distinct purposes never share Philox counters, so e.g.
// skipping the noise draws of a zero-noise batch cannot shift the features.
enum class StreamPurpose : std::uint32_t {
  kFeatures = 0,
  kLabelNoise = 1,
  kPolicy = 2,
  kProblemGen = 3,
};

// One deterministic stream keyed by (seed, agent, iteration, purpose).
// Identical keys reproduce identical output bit for bit.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t agent, std::uint32_t iteration,
             StreamPurpose purpose)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        prefix_{iteration, agent, static_cast<std::uint32_t>(purpose)} {}

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      buf_ = philox::block({prefix_[0], prefix_[1], prefix_[2], block_}, key_);
      ++block_;
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform double in [0, 1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the pair's second value is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

 private:
  philox::Key key_;
  std::array<std::uint32_t, 3> prefix_;
  std::uint32_t block_ = 0;
  philox::Counter buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fedgain
