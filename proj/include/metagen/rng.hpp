#pragma once

#include <cstdint>
#include <random>

namespace metagen {

// All stochastic operations take a caller-owned generator so that runs can
// be scheduled on any thread without changing their output.
using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t avalanche64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return avalanche64(avalanche64(a) ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b), c);
}

}  // namespace metagen
