#pragma once

#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <limits>
#include <span>

namespace fluxmod::rng {

/// Stream tags; a derived seed is a hash of (master seed, tag, index) so
/// that every window / trajectory owns an independent stream regardless of
/// the order in which work is scheduled.
enum class Stream : std::uint64_t {
  dc_white = 1,
  ac_white = 2,
  dc_pink = 3,
  ac_pink = 4,
  trajectory = 5,
  generic = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream tag,
                                    std::uint64_t index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  return splitmix64(h ^ index);
}

/// Counter-based 64-bit generator (SplitMix64); satisfies
/// UniformRandomBitGenerator.
class Engine {
 public:
  using result_type = std::uint64_t;
  explicit Engine(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t state_;
};

inline Engine make_engine(std::uint64_t master, Stream tag,
                          std::uint64_t index) {
  return Engine(derive_seed(master, tag, index));
}

/// Fills `out` with independent N(0, sigma^2) draws.
inline void fill_normal(Engine& eng, std::span<double> out, double sigma) {
  boost::random::normal_distribution<double> nd(0.0, 1.0);
  for (double& v : out) v = sigma * nd(eng);
}

}  // namespace fluxmod::rng
