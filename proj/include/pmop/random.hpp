#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pmop {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a
inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent stream keyed by (seed, query, stage, epoch, purpose). The result
/// does not depend on which worker evaluates the query.
inline Rng stream_for(std::uint64_t seed, std::string_view query_id, std::uint64_t stage, std::uint64_t epoch,
                      std::uint64_t purpose = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ hash_string(query_id));
  h = splitmix64(h ^ stage);
  h = splitmix64(h ^ epoch);
  h = splitmix64(h ^ purpose);
  return Rng(h);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace pmop
