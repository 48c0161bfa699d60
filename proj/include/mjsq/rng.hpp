#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace mjsq {

// Counter-based generator (splitmix64 output function over an incrementing
// counter). Streams derived via derive_stream() are statistically independent,
// which is what replication-level parallelism relies on.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) : counter_(seed) {}

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    std::uint64_t z = (counter_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0,1); never returns 0 or 1, safe under log().
  double uniform01() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  // Geometric on {0,1,2,...} with P(X >= v) = rho^v, sampled by inversion.
  std::int64_t geometric(double rho) {
    return static_cast<std::int64_t>(std::floor(std::log(uniform01()) / std::log(rho)));
  }

  // Unbiased integer in [0, n) by rejection on the top bits.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t v;
    do {
      v = (*this)();
    } while (v >= limit);
    return v % n;
  }

  std::uint64_t state() const { return counter_; }

 private:
  std::uint64_t counter_;
};

// Stream seed for replication r: hash(seed, r) via two splitmix64 rounds.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t r) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^ (r + 0x94d049bb133111ebULL));
}

// Standard normal sampler, Box-Muller with a cached spare. Draws from the
// owned rng in a fixed order, so runs are reproducible given the stream seed.
class NormalSampler {
 public:
  explicit NormalSampler(CounterRng& rng) : rng_(rng) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.uniform01();
    const double u2 = rng_.uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  CounterRng& rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mjsq
