#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace brmax {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds from keys.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic seed keyed by (base, k1, k2, ...). Order of keys matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(base);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

// Domain tags so that seeds drawn for different purposes never collide.
namespace seed_tag {
inline constexpr std::uint64_t kExponent = 0x56;       // 'V'
inline constexpr std::uint64_t kBlock = 0x42;          // 'B'
inline constexpr std::uint64_t kYear = 0x59;           // 'Y'
inline constexpr std::uint64_t kSweep = 0x53;          // 'S'
inline constexpr std::uint64_t kChain = 0x43;          // 'C'
inline constexpr std::uint64_t kSimulation = 0x5a;     // 'Z'
}  // namespace seed_tag

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

}  // namespace brmax
