#ifndef IMLMM_RANDOM_HPP
#define IMLMM_RANDOM_HPP

#include <cstdint>
#include <random>

namespace imlmm {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream keyed by (master, a, b). Streams are seeded through a
// full 312-word seed sequence derived by splitmix64 so distinct keys give
// unrelated engine states.
inline Engine substream(std::uint64_t master, std::uint64_t a = 0,
                        std::uint64_t b = 0) {
  std::uint64_t key = splitmix64(master);
  key = splitmix64(key ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  key = splitmix64(key ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(key),
                    static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return Engine(seq);
}

inline std::uint64_t draw_seed(Engine& rng) { return rng(); }

}  // namespace imlmm

#endif
