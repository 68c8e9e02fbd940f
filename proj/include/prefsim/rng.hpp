#pragma once

/**
 * Deterministic random sampling.
 *
 * All randomness in the library flows through Rng, a thin wrapper over
 * std::mt19937_64 (whose output stream is fixed by the standard, so integer
 * draws are reproducible across compilers and word sizes). Distribution
 * transforms are implemented here rather than with <random> distributions,
 * which are implementation-defined:
 *
 *  - uniform doubles take the top 53 bits of a 64-bit draw,
 *  - normals use basic Box-Muller,
 *  - Gamma(alpha, 1) uses Marsaglia-Tsang squeeze rejection for alpha >= 1
 *    and the Gamma(alpha + 1) * U^(1/alpha) boost for alpha < 1,
 *  - Dirichlet(alpha * 1_B) normalizes B independent Gamma(alpha) draws.
 *
 * Parallel-safe sub-streams come from derive_seed(seed, domain, index): a
 * double application of the splitmix64 finalizer. Every operation that fans
 * out per-user work derives one sub-seed per user, so results do not depend
 * on scheduling.
 */

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "prefsim/error.hpp"

namespace prefsim {

namespace rng_detail {
// splitmix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace rng_detail

// Stream labels keep sub-seeds from colliding when one run seed drives
// several sampling stages.
namespace seed_domain {
inline constexpr std::uint64_t population = 1;
inline constexpr std::uint64_t history = 2;
inline constexpr std::uint64_t test_cases = 3;
inline constexpr std::uint64_t assignment = 4;
inline constexpr std::uint64_t selection = 5;
}  // namespace seed_domain

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t domain,
                                    std::uint64_t index) {
  using rng_detail::mix64;
  return mix64(mix64(mix64(seed) ^ domain) ^ index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1); redraws the measure-zero 0.
  double uniform_open() {
    for (;;) {
      double u = uniform();
      if (u > 0.0) return u;
    }
  }

  // Unbiased integer in [0, n) via threshold rejection.
  std::uint64_t bounded(std::uint64_t n) {
    require(n > 0, "rng: bounded() needs n > 0");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  // Standard normal, basic Box-Muller (cosine branch only).
  double normal() {
    double u1 = uniform_open();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi_ * u2);
  }

  // Gamma(alpha, 1), alpha > 0.
  double gamma(double alpha) {
    require(alpha > 0.0, "rng: gamma() needs alpha > 0, got ", alpha);
    if (alpha < 1.0) {
      double u = uniform_open();
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform_open();
      double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Symmetric Dirichlet(alpha * 1_B). Resamples in the (astronomically rare)
  // event that every Gamma draw underflows to zero.
  std::vector<double> dirichlet(std::size_t b_count, double alpha) {
    require(b_count >= 1, "rng: dirichlet() needs B >= 1");
    std::vector<double> w(b_count);
    for (;;) {
      double sum = 0.0;
      for (double& x : w) {
        x = gamma(alpha);
        sum += x;
      }
      if (sum > 0.0) {
        for (double& x : w) x /= sum;
        return w;
      }
    }
  }

  // First k entries of a seeded Fisher-Yates shuffle of {0, ..., n-1}:
  // a uniform sample of k distinct indices, in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    require(k <= n, "rng: cannot sample ", k, " distinct items from ", n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(bounded(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    return sample_indices(n, n);
  }

 private:
  static constexpr double pi_ = 3.141592653589793238462643383279502884;
  std::mt19937_64 gen_;
};

}  // namespace prefsim
