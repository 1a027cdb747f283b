#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace samlab {

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic RNG. mt19937_64 for the stream, but all conversions to
// floating point are done by hand so draws are identical on any platform
// (the std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(detail::splitmix64(seed)) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Truncated normal: resample while |z| > 2 sigma.
  double trunc_normal(double sigma) {
    double z = normal();
    while (std::abs(z) > 2.0) z = normal();
    return z * sigma;
  }

  double gumbel() {
    double u = uniform();
    while (u <= 1e-300) u = uniform();
    return -std::log(-std::log(u));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = next_u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent stream derived from this RNG's seed, stable under the
  // (seed, stream) pair regardless of how much this RNG has been consumed.
  Rng fork(uint64_t stream) const { return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream + 1))); }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace samlab
