#ifndef ZRP_RNG_HPP
#define ZRP_RNG_HPP

#include <cmath>
#include <cstdint>

namespace zrp {

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Counter-based generator: output i of stream s under seed q is
/// mix64(key(q, s) + i * golden_gamma). Streams are cheap to derive, so
/// each (path, site) pair can own an independent stream; replaying a
/// stream from its start is exact.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(seed + 0x9e3779b97f4a7c15ull) ^
             mix64(stream * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull)),
        counter_(0) {}

  std::uint64_t next() {
    return mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ull);
  }

  /// Uniform on (0,1), never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(
        (static_cast<unsigned __int128>(next()) * static_cast<std::uint64_t>(n)) >> 64);
  }

  /// Poisson by exponential inter-arrivals; fine for the means used here.
  long poisson(double mean) {
    long k = 0;
    double acc = 0.0;
    while (true) {
      acc += exponential(1.0);
      if (acc > mean) return k;
      ++k;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Stream id for path-level parallel work: one stream per (path, lane).
inline constexpr std::uint64_t path_stream(std::uint64_t path, std::uint64_t lane = 0) {
  return path * 64 + lane;
}

}  // namespace zrp

#endif
