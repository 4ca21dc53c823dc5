#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace simpletir {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t hash_bytes(std::string_view s, std::uint64_t seed = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x51ed270b9d5c2c4bull);
  for (unsigned char c : s) h = splitmix64(h ^ c);
  return h;
}

// Seedable named substream generator. mt19937_64 has a standard-pinned
// sequence, so runs are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)), base_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased and deterministic.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (deterministic, platform-stable).
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
  }

  // Derived independent substream.
  Rng substream(std::uint64_t a, std::uint64_t b = 0) const {
    return Rng(mix64(mix64(base_, a), b));
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t base_ = 0;
};

}  // namespace simpletir
