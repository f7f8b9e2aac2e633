#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "relimu/geometry.hpp"

namespace relimu {

/// splitmix64 step, used to derive per-run seeds from the master seed.
inline uint64_t seed_hash(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic Gaussian stream: mt19937_64 + Box-Muller. Self-contained
/// so the draw sequence does not depend on the standard library's
/// normal_distribution implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform() {
    // (0, 1]
    return (static_cast<double>(gen_()) + 1.0) * 0x1.0p-64;
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vec3 gaussian_vec3() {
    Vec3 v;
    v << gaussian(), gaussian(), gaussian();
    return v;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace relimu
