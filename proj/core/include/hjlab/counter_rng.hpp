#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace hjlab {

// Stateless counter-based hashing: a key tuple maps to 64 random bits.
// Every random quantity in an environment is drawn this way so that field
// evaluation is random-access and replays are exact.
inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_key(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x243F6A8885A308D3ull;
  for (auto w : words) h = splitmix64(h ^ splitmix64(w));
  return h;
}

// Uniform on [0,1) with 53 random bits.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform on (0,1]; safe to take a logarithm of.
inline double to_unit_open0(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

inline std::uint64_t as_word(std::int64_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace hjlab
