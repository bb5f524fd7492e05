#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace lamd {

// xoshiro256** stream whose state is expanded from (seed, stream_id) by
// SplitMix64. Only integer arithmetic feeds the state, so the raw 64-bit
// sequence is identical on every platform.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id = 0) : seed_(seed), stream_(stream_id) {
    std::uint64_t sm = seed ^ (stream_id * 0xD1B54A32D192ED03ULL);
    sm += stream_id;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fixed stream ids so that independent consumers of one seed never overlap.
namespace streams {
inline constexpr std::uint64_t kGeneratorInit = 1;
inline constexpr std::uint64_t kDiscriminatorInit = 2;
inline constexpr std::uint64_t kEncoderInit = 3;
inline constexpr std::uint64_t kShuffle = 10;
inline constexpr std::uint64_t kTrainLatents = 11;
inline constexpr std::uint64_t kGloCodes = 12;
inline constexpr std::uint64_t kGeneratedTargets = 20;
inline constexpr std::uint64_t kDistortion = 21;
inline constexpr std::uint64_t kPermutation = 22;
inline constexpr std::uint64_t kFrechetSamples = 23;
// Recovery streams live above this base; see target_stream in recovery.hpp.
inline constexpr std::uint64_t kRecoveryBase = 1ULL << 32;
}  // namespace streams

}  // namespace lamd
