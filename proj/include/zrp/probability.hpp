#ifndef ZRP_PROBABILITY_HPP
#define ZRP_PROBABILITY_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "zrp/errors.hpp"
#include "zrp/rng.hpp"

namespace zrp {

/// Chernoff bound on P(Z >= B E[Z]) for Z Poisson: exp(-(1 + B ln B - B) E[Z]).
inline double poisson_tail_bound(double mean, double big_b) {
  if (!(big_b > 1.0)) throw InvalidArgument("poisson_tail_bound needs B > 1");
  if (!(mean > 0.0)) throw InvalidArgument("poisson_tail_bound needs mean > 0");
  return std::exp(-(1.0 + big_b * std::log(big_b) - big_b) * mean);
}

/// Bound on P(exists t: M(t) >= a, <M,M>_t <= b2) for a martingale with
/// jumps bounded by K: exp(-a^2 / (2(aK + b2))).
inline double martingale_tail_bound(double a, double b2, double jump_bound) {
  if (!(a > 0.0)) throw InvalidArgument("martingale_tail_bound needs a > 0");
  if (b2 < 0.0 || jump_bound < 0.0)
    throw InvalidArgument("martingale_tail_bound needs b2, K >= 0");
  return std::exp(-a * a / (2.0 * (a * jump_bound + b2)));
}

/// S = sum of independent Exp(lambda_i) variables.
struct ExpSumSpec {
  std::vector<double> rates;

  explicit ExpSumSpec(std::vector<double> r) : rates(std::move(r)) {
    if (rates.empty()) throw InvalidArgument("empty rate list");
    for (double v : rates)
      if (!(v > 0.0)) throw InvalidArgument("exponential rates must be positive");
  }

  double mean() const {
    double s = 0.0;
    for (double v : rates) s += 1.0 / v;
    return s;
  }

  double variance() const {
    double s = 0.0;
    for (double v : rates) s += 1.0 / (v * v);
    return s;
  }

  double min_rate() const {
    double s = rates.front();
    for (double v : rates) s = std::min(s, v);
    return s;
  }
};

inline double expsum_sample(const ExpSumSpec& spec, CounterRng& rng) {
  double s = 0.0;
  for (double v : spec.rates) s += rng.exponential(v);
  return s;
}

struct ExpSumBounds {
  /// P(S - ES <= -sqrt(Var S) B) <= lower_tail = e^{-B^2/4}.
  double lower_tail;
  /// P(S - ES >= lambda Var S + B/lambda) <= upper_tail = e^{-B/2},
  /// lambda = min rate.
  double upper_tail;
};

inline ExpSumBounds expsum_bounds(const ExpSumSpec&, double big_b) {
  if (big_b < 0.0) throw InvalidArgument("expsum_bounds needs B >= 0");
  return {std::exp(-big_b * big_b / 4.0), std::exp(-big_b / 2.0)};
}

/// Wilson score interval for a binomial proportion.
struct WilsonInterval {
  double estimate;
  double lower;
  double upper;
};

inline WilsonInterval wilson_interval(long successes, long trials, double z = 3.0) {
  if (trials <= 0) throw InvalidArgument("wilson_interval needs trials > 0");
  double n = static_cast<double>(trials);
  double p = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {p, std::max(0.0, center - half), std::min(1.0, center + half)};
}

/// Sample mean with standard error.
struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
  long count = 0;
};

inline MeanEstimate mean_estimate(const std::vector<double>& xs) {
  MeanEstimate e;
  e.count = static_cast<long>(xs.size());
  if (e.count == 0) return e;
  double s = 0.0;
  for (double v : xs) s += v;
  e.mean = s / e.count;
  double q = 0.0;
  for (double v : xs) q += (v - e.mean) * (v - e.mean);
  if (e.count > 1) e.se = std::sqrt(q / (e.count - 1) / e.count);
  return e;
}

}  // namespace zrp

#endif
