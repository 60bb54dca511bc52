#pragma once

// Seed handling: one master seed expands into named per-component streams
// (init, batch, dataset, per-run, ...) so that parallel runs never share
// generator state and resumed runs can restore streams exactly.

#include <cstdint>
#include <random>
#include <string_view>

namespace cgdlab::rng {

// One round of the splitmix64 output function; advances the state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over the tag bytes; stable across platforms.
inline std::uint64_t fnv1a64(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream seed = two splitmix64 rounds over (master XOR hash(tag)).
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::string_view tag) {
  std::uint64_t s = master ^ fnv1a64(tag);
  splitmix64(s);
  return splitmix64(s);
}

inline std::mt19937_64 make_stream(std::uint64_t master, std::string_view tag) {
  return std::mt19937_64(derive_stream_seed(master, tag));
}

}  // namespace cgdlab::rng
