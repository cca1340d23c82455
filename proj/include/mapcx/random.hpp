#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mapcx {

using Rng = std::mt19937_64;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a path of
/// indices, e.g. derive_seed(seed, {sample, theta}). The result depends
/// only on its arguments, never on call order or thread scheduling.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

// Domain tags so that streams for different purposes never collide.
enum class Stream : std::uint64_t {
  split = 1,
  bootstrap = 2,
  synth = 3,
  init = 4,
  shuffle = 5,
  prior = 6,
  active = 7,
  adapt = 8,
  repetition = 9,
};

inline std::uint64_t derive_seed(std::uint64_t base, Stream tag,
                                 std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = derive_seed(base, {static_cast<std::uint64_t>(tag)});
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace mapcx
