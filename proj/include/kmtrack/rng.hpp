#pragma once

#include "kmtrack/point.hpp"

#include <cstdint>
#include <random>

namespace kmtrack {

// Counter-based seed splitting. Every random stream in the project is derived
// from (seed, tags...) so that parallel execution order cannot change draws.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and up to three tags.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                            std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return s;
}

inline std::mt19937_64 engine(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
  return std::mt19937_64(derive(seed, a, b, c));
}

// Fixed stream tags, one per consumer of randomness.
enum Stream : std::uint64_t {
  kProblem = 1,
  kOracleNoise = 2,
  kBanditDirections = 3,
  kScenario = 4,
  kInit = 5,
  kCalibration = 6,
};

/// Uniform double in [0, 1).
inline double uniform01(std::mt19937_64& g) {
  return (g() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (no cached second variate, so the draw
/// sequence is a pure function of the engine state).
inline double gaussian(std::mt19937_64& g) {
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Point gaussian_vector(std::mt19937_64& g, Eigen::Index dim) {
  Point v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = gaussian(g);
  return v;
}

/// Uniform direction on the unit sphere in R^dim.
inline Point unit_vector(std::mt19937_64& g, Eigen::Index dim) {
  Point v = gaussian_vector(g, dim);
  double n = v.norm();
  while (n < 1e-12) {  // astronomically unlikely; redraw
    v = gaussian_vector(g, dim);
    n = v.norm();
  }
  return v / n;
}

}  // namespace rng
}  // namespace kmtrack
