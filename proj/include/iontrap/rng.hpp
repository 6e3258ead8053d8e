#pragma once

#include <cmath>
#include <cstdint>

#include "iontrap/constants.hpp"

namespace iontrap {

// Reproducible, splittable random streams. Every (grid cell, repetition)
// gets its own stream derived purely from (seed, cell, rep), so results do
// not depend on how work is scheduled across threads.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** with a Box-Muller gaussian on top.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in (0, 1]
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * constants::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Independent stream for one (cell, repetition) of a sweep.
inline Rng stream_for(std::uint64_t seed, std::uint64_t cell,
                      std::uint64_t rep) {
  std::uint64_t sm = seed;
  std::uint64_t a = splitmix64(sm);
  sm = a ^ (0x632be59bd9b4e019ULL + cell * 0x9e3779b97f4a7c15ULL);
  std::uint64_t b = splitmix64(sm);
  sm = b ^ (0xd1b54a32d192ed03ULL + rep * 0x2545f4914f6cdd1dULL);
  return Rng(splitmix64(sm));
}

}  // namespace iontrap
