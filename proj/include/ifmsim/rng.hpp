#pragma once

// Reproducible randomness. All randomness in a run flows from one master
// seed through the documented splitting scheme:
//
//   child(seed, index) = splitmix64(seed XOR splitmix64(index + 1))
//
// Streams are organized as a tree (run seed -> procedure section -> grid
// point), so independent points draw from disjoint generators and results
// do not depend on evaluation order. The sample source is std::mt19937_64
// (bit-exact by the standard) with 53-bit uniforms; the Poisson sampler is
// implemented here rather than via std::poisson_distribution, whose output
// is implementation defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace ifmsim::counting {

struct RngSeed {
  std::uint64_t value = 0;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives the `index`-th child stream of `seed`.
constexpr RngSeed derive_stream(RngSeed seed, std::uint64_t index) {
  return {splitmix64(seed.value ^ splitmix64(index + 1))};
}

class CountingRng {
 public:
  explicit CountingRng(RngSeed seed) : engine_(seed.value) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Exact Poisson sample. Knuth's product method below mean 10, the
  /// transformed-rejection method (PTRS) above.
  std::int64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson mean must be non-negative");
    if (mean == 0.0) return 0;
    if (mean >= 9.223372036854776e18) throw std::invalid_argument("poisson mean too large");
    return mean < 10.0 ? poisson_knuth(mean) : poisson_ptrs(mean);
  }

 private:
  std::int64_t poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::int64_t poisson_ptrs(double mean) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          k * loglam - mean - std::lgamma(k + 1.0)) {
        return static_cast<std::int64_t>(k);
      }
    }
  }

  std::mt19937_64 engine_;
};

}  // namespace ifmsim::counting
