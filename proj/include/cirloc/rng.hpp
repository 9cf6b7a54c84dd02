#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace cirloc {

/// SplitMix64 finalizer, used to derive stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Philox4x32-10 counter-based generator.
///
/// Output i of a stream is a pure function of (key, i), so any number of
/// independent streams can be carved out of one seed with split() and
/// consumed in any order. Satisfies UniformRandomBitGenerator.
class Philox {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Philox(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  /// Independent child stream. Does not advance this generator.
  constexpr Philox split(std::uint64_t stream) const {
    return Philox(mix64(key_ ^ mix64(stream + 0x632be59bd9b4e019ull)));
  }

  constexpr std::uint64_t key() const { return key_; }

  result_type operator()() {
    if (have_ == 0) {
      block_ = bijection(counter_++);
      have_ = 2;
    }
    --have_;
    const auto lo = block_[2 * have_];
    const auto hi = block_[2 * have_ + 1];
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Both variates of a pair are used.
  double normal() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    spare_valid_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    while (true) {
      const auto x = (*this)();
      const auto m = static_cast<unsigned __int128>(x) * n;
      const auto low = static_cast<std::uint64_t>(m);
      if (low >= n || low >= (0 - n) % n) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

 private:
  using Block = std::array<std::uint32_t, 4>;

  Block bijection(std::uint64_t counter) const {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    Block ctr = {static_cast<std::uint32_t>(counter),
                 static_cast<std::uint32_t>(counter >> 32), 0u, 0u};
    std::uint32_t k0 = static_cast<std::uint32_t>(key_);
    std::uint32_t k1 = static_cast<std::uint32_t>(key_ >> 32);
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
             static_cast<std::uint32_t>(p0)};
      k0 += kW0;
      k1 += kW1;
    }
    return ctr;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  Block block_{};
  int have_ = 0;
  double spare_ = 0.0;
  bool spare_valid_ = false;
};

}  // namespace cirloc
