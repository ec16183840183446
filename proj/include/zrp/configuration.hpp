#ifndef ZRP_CONFIGURATION_HPP
#define ZRP_CONFIGURATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "zrp/errors.hpp"

namespace zrp {

/// Occupation vector x in Z_+^n with sum(x) = m.
struct Configuration {
  std::vector<int> occupancies;

  int site_count() const { return static_cast<int>(occupancies.size()); }

  int particle_count() const {
    return std::accumulate(occupancies.begin(), occupancies.end(), 0);
  }

  int max_occupancy() const {
    return occupancies.empty()
               ? 0
               : *std::max_element(occupancies.begin(), occupancies.end());
  }

  int operator[](int i) const { return occupancies[static_cast<std::size_t>(i)]; }
  int& operator[](int i) { return occupancies[static_cast<std::size_t>(i)]; }

  bool operator==(const Configuration&) const = default;

  /// x - delta_i + delta_j.
  Configuration moved(int i, int j) const {
    Configuration y = *this;
    --y[i];
    ++y[j];
    return y;
  }
};

inline Configuration all_at_site(int n, int m, int site = 0) {
  Configuration x{std::vector<int>(static_cast<std::size_t>(n), 0)};
  x[site] = m;
  return x;
}

/// phi^theta(x) = (1/n) sum_i e^{theta x_i}. A hard exponent cap keeps the
/// failure mode deterministic instead of silently producing inf.
inline double phi_theta(const Configuration& x, double theta,
                        double exponent_cap = 700.0) {
  if (!(theta > 0.0)) throw InvalidArgument("phi_theta needs theta > 0");
  if (theta * x.max_occupancy() > exponent_cap)
    throw SaturationError("phi_theta exponent exceeds cap");
  double s = 0.0;
  for (int k : x.occupancies) s += std::exp(theta * k);
  return s / x.site_count();
}

/// Bijection between {x in Z_+^n : sum x = m} and [0, C(m+n-1, n-1)),
/// in ascending lexicographic order on occupancy vectors.
class StateIndex {
 public:
  StateIndex(int n, int m) : n_(n), m_(m) {
    if (n < 1 || m < 0) throw InvalidArgument("StateIndex needs n >= 1, m >= 0");
    // counts_[j][s] = number of ways to place s particles on j sites.
    counts_.assign(static_cast<std::size_t>(n) + 1,
                   std::vector<std::uint64_t>(static_cast<std::size_t>(m) + 1, 0));
    for (int s = 0; s <= m; ++s) counts_[0][static_cast<std::size_t>(s)] = (s == 0);
    for (int j = 1; j <= n; ++j)
      for (int s = 0; s <= m; ++s) {
        std::uint64_t acc = 0;
        for (int v = 0; v <= s; ++v) {
          std::uint64_t c = counts_[static_cast<std::size_t>(j) - 1]
                                   [static_cast<std::size_t>(s - v)];
          if (acc > std::numeric_limits<std::uint64_t>::max() - c)
            throw CapExceeded("state space size overflows 64 bits");
          acc += c;
        }
        counts_[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)] = acc;
      }
  }

  int site_count() const { return n_; }
  int particle_count() const { return m_; }

  std::uint64_t size() const {
    return counts_[static_cast<std::size_t>(n_)][static_cast<std::size_t>(m_)];
  }

  std::uint64_t rank(const Configuration& x) const {
    if (x.site_count() != n_ || x.particle_count() != m_)
      throw InvalidArgument("configuration does not belong to this state space");
    std::uint64_t idx = 0;
    int rem = m_;
    for (int i = 0; i < n_; ++i) {
      int xi = x[i];
      // states with a smaller value at position i, same prefix
      for (int v = 0; v < xi; ++v)
        idx += counts_[static_cast<std::size_t>(n_ - i - 1)]
                      [static_cast<std::size_t>(rem - v)];
      rem -= xi;
    }
    return idx;
  }

  Configuration unrank(std::uint64_t idx) const {
    if (idx >= size()) throw InvalidArgument("state index out of range");
    Configuration x{std::vector<int>(static_cast<std::size_t>(n_), 0)};
    int rem = m_;
    for (int i = 0; i < n_; ++i) {
      for (int v = 0;; ++v) {
        std::uint64_t c = counts_[static_cast<std::size_t>(n_ - i - 1)]
                                 [static_cast<std::size_t>(rem - v)];
        if (idx < c) {
          x[i] = v;
          rem -= v;
          break;
        }
        idx -= c;
      }
    }
    return x;
  }

 private:
  int n_, m_;
  std::vector<std::vector<std::uint64_t>> counts_;
};

}  // namespace zrp

#endif
