#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vap {

// splitmix64; used to derive independent child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// mt19937_64 with hand-rolled distributions. The standard engine's output is
// pinned by the standard, while std::*_distribution is not, so sampling here
// stays reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : engine_(mix_seed(seed)), seed_base_(mix_seed(seed)) {}

  // Child stream for (master seed, stream index); streams are independent.
  Rng child(std::uint64_t stream) const {
    return Rng(mix_seed(seed_base_ ^ mix_seed(stream + 0x51ed2701)));
  }

  double uniform() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t bits() { return engine_(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

  double exponential(double mean) {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    return -mean * std::log(u);
  }

  // Fisher-Yates; deterministic given the engine state.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = engine_() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_base_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace vap
