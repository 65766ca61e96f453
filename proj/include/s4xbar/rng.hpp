#pragma once

#include <bit>
#include <cstdint>
#include <type_traits>
#include <random>
#include <string_view>

namespace s4xbar {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename T>
  requires std::is_integral_v<T>
std::uint64_t seed_tag(T v) {
  return static_cast<std::uint64_t>(v);
}
inline std::uint64_t seed_tag(double v) { return std::bit_cast<std::uint64_t>(v); }
inline std::uint64_t seed_tag(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stable per-experiment RNG streams: every (seed, tag...) combination owns an
// independent stream, so parallel runs never share state.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, Tags... tags) {
  std::uint64_t h = splitmix64(base);
  ((h = splitmix64(h ^ seed_tag(tags))), ...);
  return h;
}

template <typename... Tags>
std::mt19937_64 make_engine(std::uint64_t base, Tags... tags) {
  return std::mt19937_64(derive_seed(base, tags...));
}

}  // namespace s4xbar
