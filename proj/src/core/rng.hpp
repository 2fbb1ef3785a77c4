#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace mogaf {

// Seeded RNG used everywhere randomness is needed. Deterministic for a fixed
// seed within one build of the library.
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double sigma = 1.0) {
    return std::normal_distribution<double>(mean, sigma)(engine_);
  }
  // Uniform integer in [0, n).
  uint64_t index(uint64_t n) {
    return std::uniform_int_distribution<uint64_t>(0, n - 1)(engine_);
  }
  Eigen::Vector3d vec3_normal(double sigma = 1.0) {
    return {normal(0.0, sigma), normal(0.0, sigma), normal(0.0, sigma)};
  }
  Eigen::Vector3d unit_vec3() {
    Eigen::Vector3d v;
    do {
      v = vec3_normal();
    } while (v.norm() < 1e-9);
    return v.normalized();
  }
  // Derives an independent stream (e.g. one per group or per frame).
  Rng fork(uint64_t stream) {
    return Rng(engine_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

}  // namespace mogaf
