#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <vector>

namespace flowsift::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed plus salts.
inline std::uint64_t mix_seed(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> salts) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t s : salts) h = splitmix64(h ^ s);
  return h;
}

// Seeded generator with hand-rolled distributions. std::*_distribution output
// is implementation-defined; these are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive. Rejection sampling, no modulo bias.
  std::uint64_t uniform_u64(std::uint64_t lo, std::uint64_t hi) {
    if (lo > hi) std::swap(lo, hi);
    std::uint64_t range = hi - lo;
    if (range == UINT64_MAX) return next_u64();
    std::uint64_t bound = range + 1;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    while (true) {
      std::uint64_t v = next_u64();
      if (v < limit) return lo + v % bound;
    }
  }

  // Box-Muller; draws two uniforms per call.
  double normal(double mean, double sd) {
    double u1 = 1.0 - u01();
    double u2 = u01();
    double z = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    return mean + sd * z;
  }

  // Log-normal with the given arithmetic mean and standard deviation.
  double lognormal_from_moments(double mean, double sd) {
    if (sd <= 0.0) return mean;
    double sigma2 = std::log1p((sd * sd) / (mean * mean));
    double mu = std::log(mean) - 0.5 * sigma2;
    return std::exp(normal(mu, std::sqrt(sigma2)));
  }

 private:
  std::mt19937_64 eng_;
};

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_u64(0, i - 1));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace flowsift::detail
