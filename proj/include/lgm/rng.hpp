#pragma once

// Self-contained RNG so all sampled output is bit-reproducible across
// standard libraries and thread counts. xoshiro256++ with splitmix64
// seeding; distributions are implemented here rather than taken from
// <random> because the standard leaves their algorithms unspecified.

#include <cmath>
#include <cstdint>

namespace lgm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97f4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
    have_spare_ = false;
    spare_ = 0.0;
  }

  // Independent stream for (seed, counter): used for per-draw seeding so a
  // draw's values do not depend on which thread produced it.
  static Rng stream(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t sm = seed;
    std::uint64_t a = splitmix64(sm);
    sm = counter ^ 0xD2B74407B1CE6E93ULL;
    std::uint64_t b = splitmix64(sm);
    return Rng(a ^ (b + 0x9E3779B97f4A7C15ULL + (a << 6) + (a >> 2)));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1)
  double uniform_pos() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double exponential() { return -std::log(uniform_pos()); }

  bool bernoulli(double p) { return uniform() < p; }

  // index in [0, n) with probability proportional to weights[i]
  template <typename Vec>
  int categorical(const Vec& weights) {
    const int n = static_cast<int>(weights.size());
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += weights[i];
    const double u = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  bool have_spare_;
  double spare_;
};

}  // namespace lgm
