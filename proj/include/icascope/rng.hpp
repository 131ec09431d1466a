#pragma once

#include <cmath>
#include <cstdint>

namespace icascope {

// Deterministic PRNG (splitmix64). The standard <random> distributions are
// implementation-defined, which would break bit-reproducibility contracts
// across toolchains, so sampling is done here by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; one normal per two uniforms keeps the stream simple.
  double gaussian() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Unit-variance Laplacian via inverse CDF.
  double laplacian() {
    double u = uniform() - 0.5;
    double b = 0.7071067811865476;  // 1/sqrt(2)
    return u < 0 ? b * std::log(1.0 + 2.0 * u) : -b * std::log(1.0 - 2.0 * u);
  }

 private:
  std::uint64_t state_;
};

// Stable per-item seed derivation for parallel-safe generation.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  Rng r(seed ^ (0x632be59bd9b4e019ULL * (index + 1)));
  return r.next_u64();
}

}  // namespace icascope
