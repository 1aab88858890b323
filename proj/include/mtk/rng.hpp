#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace mtk {

// Splitmix64 generator. One 64-bit word of state, bit-reproducible across
// platforms; every randomized path in the library derives from one of these.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; consumes exactly two uniforms per call
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // integer in [0, n)
  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  // Derive an independent stream keyed on a tag. Used to give each clip,
  // window draw, etc. its own reproducible sequence.
  Rng fork(uint64_t tag) {
    Rng child(state_ ^ (tag * 0xd1b54a32d192ed03ull + 0x8cb92ba72f3d8dd7ull));
    child.next_u64();
    return child;
  }

  Rng fork(std::string_view tag) { return fork(hash(tag)); }

  static uint64_t hash(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  uint64_t state_;
};

}  // namespace mtk
