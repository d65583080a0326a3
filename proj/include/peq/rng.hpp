#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace peq {

// Counter-based generator built on the splitmix64 finalizer. Substreams are
// derived by hashing (seed, stream), so per-trajectory noise is reproducible
// regardless of generation order or thread count.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// hashed sub-seed for handing a named stream to another component
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x8f1bbcdcbfa53e0bULL)) {}

  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed);
    r.state_ ^= mix64(stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    r.next_u64();
    return r;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform on [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller; second value of each pair is cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double sd) { return sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // bounded draw without rejection (Lemire multiply-shift)
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace peq
