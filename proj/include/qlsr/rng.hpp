#ifndef QLSR_RNG_HPP
#define QLSR_RNG_HPP

#include <cstdint>
#include <random>

namespace qlsr {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates nearby keys.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

// Counter-based substream keyed by (seed, index): replication r always sees
// the same stream no matter how work is split across threads.
inline Rng substream(std::uint64_t seed, std::uint64_t index) {
  return Rng(mix64(mix64(seed) + index));
}

}  // namespace qlsr

#endif
