#pragma once

// Seeded randomness. Every randomized operation takes an explicit seed or an
// Rng; parallel work derives independent per-item seeds with derive_seed so
// results never depend on scheduling.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace qdx {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(base);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ (b + 0x632be59bd9b4e019ULL));
  s = splitmix64(s ^ (c + 0x2545f4914f6cdd1dULL));
  return s;
}

/// Shot count for a probability estimate; `infinite()` returns exact values.
class Shots {
 public:
  explicit Shots(std::uint64_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("shot count must be at least 1");
  }
  static Shots infinite() { return Shots(); }

  bool is_infinite() const { return n_ == 0; }
  std::uint64_t count() const { return n_; }

 private:
  Shots() = default;
  std::uint64_t n_ = 0;  // 0 encodes the infinite-shot sentinel
};

/// Binomial estimate of `p`, or `p` itself for infinite shots.
inline double sample_probability(double p, const Shots& shots, Rng& rng) {
  if (p < 0) p = 0;
  if (p > 1) p = 1;
  if (shots.is_infinite()) return p;
  std::binomial_distribution<std::uint64_t> dist(shots.count(), p);
  return static_cast<double>(dist(rng)) / static_cast<double>(shots.count());
}

/// Uniform integer in [0, n). Implemented directly so the stream is identical
/// across standard library vendors.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) {
  // Box-Muller on vendor-independent uniforms.
  double u1 = uniform_unit(rng);
  while (u1 <= 0) u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace qdx
