#ifndef TEXTURE_RNG_HPP
#define TEXTURE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace texture {

// SplitMix64 (Steele, Lea & Flood 2014). Chosen over <random> because the
// standard distributions are implementation-defined; everything here is
// specified bit-for-bit so other languages can reproduce the same streams:
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// uniform() = (next() >> 11) * 2^-53, in [0, 1).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to take the log of.
  double uniform_open() noexcept { return 1.0 - uniform(); }

  // Unbiased integer in [0, bound): draws below (2^64 mod bound) are
  // rejected, the rest reduced modulo bound.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Box-Muller, one value per call (the sine branch is discarded).
  double normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Gamma(1) draw, i.e. one Dirichlet(1, ..., 1) component before normalizing.
  double exponential() noexcept { return -std::log(uniform_open()); }

 private:
  std::uint64_t state_;
};

/// FNV-1a 64-bit over raw bytes.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t hash = 0xCBF29CE484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

/// Per-slot stream seed: SplitMix64 seeded with master ^ FNV-1a(slot_id),
/// first output.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view slot_id) noexcept {
  SplitMix64 mix(master_seed ^ fnv1a64(slot_id));
  return mix.next();
}

/// Per-index stream seed, for generators that number their outputs.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
  SplitMix64 mix(master_seed);
  std::uint64_t s = mix.next();
  SplitMix64 mix2(s ^ (index * 0xD1B54A32D192ED03ULL));
  return mix2.next();
}

}  // namespace texture

#endif  // TEXTURE_RNG_HPP
