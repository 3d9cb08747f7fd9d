#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace supreg {

// SplitMix64 finalizer; used only to derive independent stream seeds.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a path of stream labels.
/// derive_seed(s, {a, b}) == derive_seed(derive_seed(s, {a}), {b}).
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = seed;
  for (auto label : path) s = mix64(s ^ mix64(label + 0x632be59bd9b4e019ULL));
  return s;
}

/// Stream labels. Design and noise draws never share a stream so a design can
/// be reused across noise replications.
enum class Stream : std::uint64_t {
  design = 1,
  noise = 2,
  replication = 3,
  prior = 4,
  bootstrap = 5,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) noexcept {
  return derive_seed(seed, {static_cast<std::uint64_t>(stream)});
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace supreg
