#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ldlab::rng {

// One SplitMix64 step. Used only to key substreams, never as the main generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// xoshiro256** keyed by (seed, stream). A substream is a pure function of its
// key: the same (seed, stream) pair always replays the same sequence, so any
// per-sample draw is reproducible regardless of evaluation order or thread
// placement. Samplers are hand-rolled (not <random> distributions) so results
// are identical across standard library implementations.
class Substream {
 public:
  Substream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t key = seed;
    (void)splitmix64(key);
    key ^= 0xA3EC647659359ACDull * (stream + 1);
    for (auto& word : s_) word = splitmix64(key);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on (0,1]; never returns 0 so logs are safe.
  double uniform() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

  double exponential() { return -std::log(uniform()); }

  // Box-Muller with the second variate cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 6.283185307179586476925286766559 * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Exact Poisson draw. Inversion is O(mean); larger means split by
  // infinite divisibility instead of risking e^{-mean} underflow.
  long long poisson(double mean) {
    if (mean < 0 || !std::isfinite(mean))
      throw std::invalid_argument("poisson: mean must be finite and nonnegative");
    if (mean == 0) return 0;
    if (mean > 30.0) return poisson(mean / 2) + poisson(mean / 2);
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    long long k = 0;
    const long long cap = 200 + 4 * static_cast<long long>(mean);
    while (u > cdf && k < cap) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ldlab::rng
