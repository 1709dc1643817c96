#pragma once

#include <cstdint>

namespace alfr {

// Independent sub-seeds for each consumer of randomness in a run, so adding a
// consumer never shifts the stream seen by another.
enum class SeedStream : std::uint64_t {
  encoder = 1,
  decoder = 2,
  adversary = 3,
  shuffle = 4,
  finetune = 5,
  probe = 6,
  split = 7,
  synthetic = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, SeedStream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ static_cast<std::uint64_t>(stream)) + index);
}

}  // namespace alfr
