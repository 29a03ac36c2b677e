#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace svla {

// Deterministic RNG used everywhere in the project. All distributions are
// implemented on top of the raw mt19937_64 stream so that draw sequences are
// reproducible bit-for-bit regardless of the standard library in use.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // uniform double in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * kInv53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; second draw of each pair is cached
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    // u1 in (0, 1] so the log is finite
    double u1 = static_cast<double>((gen_() >> 11) + 1) * kInv53;
    double u2 = static_cast<double>(gen_() >> 11) * kInv53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

  // {0,1} with P(1) = p; p=0 never fires, p=1 always fires
  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // uniform integer in [0, n), rejection sampled to avoid modulo bias
  uint64_t uniform_int(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  uint64_t raw() { return gen_(); }

  // Named substream, so parallel consumers (e.g. one per episode) draw from
  // independent deterministic sequences derived from (seed, stream, index).
  static Rng derive(uint64_t seed, std::string_view stream, uint64_t index = 0) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    };
    mix(seed);
    for (char c : stream) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    mix(index);
    return Rng(h);
  }

 private:
  static constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  std::mt19937_64 gen_;
  bool has_cache_ = false;
  double cache_ = 0.0;
};

}  // namespace svla
