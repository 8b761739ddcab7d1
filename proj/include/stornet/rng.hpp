#pragma once

#include <cmath>
#include <cstdint>

namespace stornet::rng {

// Counter-based generator: every draw is a pure function of
// (seed, stream, t, k), so traces are reproducible across runs and
// platforms and parallel runs never share state.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t counter(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t t, std::uint64_t k) {
  std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
  h = mix64(h ^ stream);
  h = mix64(h ^ t);
  h = mix64(h ^ k);
  return h;
}

/// Uniform in the open interval (0, 1).
inline double uniform01(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(std::uint64_t h, double lo, double hi) {
  return lo + (hi - lo) * uniform01(h);
}

/// Inverse-CDF Laplace draw with location 0 and scale b.
inline double laplace(double u, double b) {
  const double v = u - 0.5;
  return (v < 0.0 ? b : -b) * std::log1p(-2.0 * std::abs(v));
}

}  // namespace stornet::rng
