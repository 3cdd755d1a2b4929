#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace v2g {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent child seed for (stream, index) under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ stream) + index);
}

namespace stream {
inline constexpr std::uint64_t fleet = 1;
inline constexpr std::uint64_t profiles = 2;
inline constexpr std::uint64_t episode = 3;
inline constexpr std::uint64_t day = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t shuffle = 6;
inline constexpr std::uint64_t scenario = 7;
}  // namespace stream

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
}

}  // namespace v2g
