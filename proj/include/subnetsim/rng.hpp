#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <absl/random/internal/pcg_engine.h>
#include <boost/random/normal_distribution.hpp>

namespace subnetsim {

// PCG64 (XSL-RR, 128-bit state). Header-only in Abseil.
using Engine = absl::random_internal::pcg64_2018_engine;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over the label bytes.
inline constexpr std::uint64_t label_hash(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the named sub-stream: splitmix64(splitmix64(master ^ hash(label)) + episode).
inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::string_view label,
                                           std::uint64_t episode = 0) noexcept {
  return splitmix64(splitmix64(master ^ label_hash(label)) + episode);
}

inline Engine make_stream(std::uint64_t master, std::string_view label, std::uint64_t episode = 0) {
  return Engine{stream_seed(master, label, episode)};
}

/// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Engine& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& rng, double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform01(rng);
}

inline std::size_t uniform_index(Engine& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>{0, n - 1}(rng);
}

inline double standard_normal(Engine& rng) {
  static thread_local boost::random::normal_distribution<double> dist{0.0, 1.0};
  return dist(rng);
}

}  // namespace subnetsim
