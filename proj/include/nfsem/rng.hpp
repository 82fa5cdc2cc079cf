#pragma once

#include <cmath>
#include <cstdint>

namespace nfsem {

// splitmix64; used both as a stream generator and to derive independent
// per-(step, ray, pixel) seeds so results do not depend on thread schedule.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  s ^= 0x632be59bd9b4e019ull + splitmix64(b) + (s << 6) + (s >> 2);
  return splitmix64(s);
}

// Small counter-based generator with plain-arithmetic distributions, so
// identical seeds give identical streams on every platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) { (void)splitmix64(state_); }

  std::uint64_t next_u64() { return splitmix64(state_); }

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased for n > 0 (modulo bias is < 2^-32 for the sizes used here).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Marsaglia polar method; consumes a variable number of draws.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nfsem
