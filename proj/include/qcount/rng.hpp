#pragma once

#include <array>
#include <cstdint>

namespace qcount::rng {

/// splitmix64 finalizer; also used as the mixing step when deriving child
/// stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// xoshiro256++ (Blackman & Vigna), state seeded through SplitMix64 as the
/// authors recommend. Integer-only transition, so streams are portable.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  std::uint64_t next() {
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

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> s_;
};

/// Child stream for one schedule entry. Streams are keyed by
/// (seed, performance, entry), so an entry's outcome does not depend on the
/// order, or on whether, other entries are evaluated:
///   child = mix64(mix64(mix64(seed) ^ G*(performance+1)) ^ G*(entry+1))
/// with G the 64-bit golden-ratio constant.
inline Xoshiro256pp entry_stream(std::uint64_t seed, std::uint64_t performance, std::uint64_t entry) {
  constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ (kGolden * (performance + 1)));
  h = mix64(h ^ (kGolden * (entry + 1)));
  return Xoshiro256pp(h);
}

}  // namespace qcount::rng
