#pragma once

#include <cstdint>
#include <initializer_list>

// Counter-based stateless draws. Every value is a pure function of
// (seed, key), so any worker can reproduce any neuron's draws without
// sharing generator state.
//
// Construction (fixed; golden outputs depend on it):
//   h = mix(seed ^ 0x6a09e667f3bcc909)
//   for i, w in enumerate(key): h = mix(h ^ mix(w + (i + 1) * 0x9e3779b97f4a7c15))
// where mix is the splitmix64 finalizer. uniform() takes the top 53 bits.
namespace dpsnn::stateless {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash(std::uint64_t seed, std::initializer_list<std::uint64_t> key) noexcept {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  std::uint64_t i = 0;
  for (std::uint64_t w : key) {
    ++i;
    h = mix64(h ^ mix64(w + i * 0x9e3779b97f4a7c15ULL));
  }
  return h;
}

/// Uniform in [0, 1).
constexpr double uniform(std::uint64_t seed, std::initializer_list<std::uint64_t> key) noexcept {
  return static_cast<double>(hash(seed, key) >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), n > 0. Uses the high half of a 64x64 product.
inline std::uint64_t uniform_index(std::uint64_t seed, std::initializer_list<std::uint64_t> key,
                                   std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(hash(seed, key)) * n) >> 64);
}

// Stream tags keep unrelated draws from sharing keys.
enum class Stream : std::uint64_t {
  kTarget = 1,
  kDelay = 2,
  kThalamic = 3,
};

constexpr std::uint64_t tag(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

}  // namespace dpsnn::stateless
