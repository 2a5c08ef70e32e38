#pragma once

#include <cstdint>
#include <random>

namespace stcausal {

// SplitMix64 step; also used as the mixing finalizer for stream keys.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ (Blackman & Vigna). Fast, 256-bit state, passes BigCrush.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed) {
    // Seed the full state through SplitMix64 as the authors recommend.
    for (auto& word : s_) word = splitmix64_next(seed);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Purpose tags for child-stream derivation. Keeping these distinct guarantees
// that e.g. the treatment draw of period t never shares a stream with the
// outcome draw of the same period.
namespace rngtag {
constexpr std::uint64_t covariate3 = 0x11;
constexpr std::uint64_t covariate4 = 0x12;
constexpr std::uint64_t treatment = 0x13;
constexpr std::uint64_t outcome = 0x14;
constexpr std::uint64_t truth_oracle = 0x15;
constexpr std::uint64_t variance_oracle = 0x16;
constexpr std::uint64_t intervention = 0x17;
constexpr std::uint64_t dataset = 0x18;
constexpr std::uint64_t calibration = 0x19;
constexpr std::uint64_t generic = 0x1a;
}  // namespace rngtag

// A keyed random stream. Every logical task (dataset, replicate, period,
// purpose) derives its own child stream from the root seed, so results do not
// depend on thread count or evaluation order, and any single period of any
// replicate is reproducible in isolation.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix(0x5ca1ab1e0ddba11ULL, seed)), gen_(key_) {}

  // Derive a child stream keyed by up to three coordinates.
  RngStream child(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return RngStream(mix(mix(mix(key_, a), b), c), internal_tag{});
  }

  std::uint64_t key() const { return key_; }
  Xoshiro256pp& engine() { return gen_; }

  // U[0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<int> dist(mean);
    return dist(gen_);
  }

 private:
  struct internal_tag {};
  RngStream(std::uint64_t key, internal_tag) : key_(key), gen_(key) {}

  static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    std::uint64_t s = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    return splitmix64_next(s);
  }

  std::uint64_t key_;
  Xoshiro256pp gen_;
};

}  // namespace stcausal
