#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace gmclt {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed for an independent purpose (calibration run, test run, ...)
// derived from a master seed and a tag.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return mix64(seed ^ mix64(tag + 0x632be59bd9b4e019ULL));
}

// FNV-1a, for turning names into seed tags.
constexpr std::uint64_t hash_tag(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based stream: the generator for sample i under seed s depends only on
// (s, i), so any partition of samples over workers draws identical numbers.
// Internally xoshiro256** keyed by SplitMix64 expansion of (seed, stream).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t key = mix64(seed) ^ mix64(stream * 0x9e3779b97f4a7c15ULL + 0xd1b54a32d192ed03ULL);
    for (auto& word : s_) {
      key += 0x9e3779b97f4a7c15ULL;
      word = mix64(key);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4]{};
};

}  // namespace gmclt
