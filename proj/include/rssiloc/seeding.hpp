#pragma once

#include <cstdint>
#include <string_view>

namespace rssiloc {

/// SplitMix64 finalizer; used to derive independent child seeds.
inline constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix_seed(parent ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// 64-bit FNV-1a, stable across platforms and runs.
inline constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept {
  return mix_seed(parent ^ fnv1a(label));
}

}  // namespace rssiloc
