#ifndef ZRP_RATE_FUNCTION_HPP
#define ZRP_RATE_FUNCTION_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zrp/errors.hpp"

namespace zrp {

struct RateValidationReport {
  bool valid = false;
  /// Smallest k >= 1 with r(k+1) < r(k), if any.
  std::optional<int> monotonicity_violation;
  /// sup r(k)/k over [1, k_max].
  double sup_ratio = 0.0;
  /// r -> infinity cannot be checked on a finite prefix; it is declared.
  bool unboundedness_declared_not_checked = true;
  std::string message;
};

/// The potential r(.): r(0) = 0, r(k) > 0 for k >= 1. Either a closed-form
/// power k^alpha or a table on a fixed horizon. Prefix sums of 1/r (the
/// function R) are cached; call prepare() before sharing across threads.
class RateFunction {
 public:
  static RateFunction power(double alpha) {
    if (!(alpha >= 0.0)) throw InvalidArgument("power rate needs alpha >= 0");
    RateFunction r;
    r.alpha_ = alpha;
    r.horizon_ = std::numeric_limits<int>::max();
    return r;
  }

  /// values[i] = r(i + 1); the horizon is values.size().
  static RateFunction table(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("empty rate table");
    for (double v : values)
      if (!(v > 0.0)) throw InvalidArgument("rate table entries must be positive");
    RateFunction r;
    r.table_ = std::move(values);
    r.horizon_ = static_cast<int>(r.table_.size());
    return r;
  }

  /// r(k); throws HorizonError past a table's horizon.
  double operator()(int k) const {
    if (k <= 0) return 0.0;
    if (k > horizon_)
      throw HorizonError("rate queried at k=" + std::to_string(k) +
                         " beyond horizon " + std::to_string(horizon_));
    if (!table_.empty()) return table_[static_cast<std::size_t>(k) - 1];
    return std::pow(static_cast<double>(k), alpha_);
  }

  int horizon() const { return horizon_; }
  bool is_power() const { return table_.empty(); }
  double alpha() const { return alpha_; }
  const std::vector<double>& table_values() const { return table_; }

  /// R(k) = sum_{i<=k} 1/r(i), R(0) = 0.
  double big_r(int k) const {
    if (k < 0) throw InvalidArgument("R(k) needs k >= 0");
    ensure_prefix(k);
    return prefix_[static_cast<std::size_t>(k)];
  }

  /// Delta(k) = r(k+1) - r(k).
  double delta(int k) const {
    if (k < 0) throw InvalidArgument("Delta(k) needs k >= 0");
    return (*this)(k + 1) - (*this)(k);
  }

  double max_delta(int k_max) const {
    double d = 0.0;
    for (int k = 0; k <= k_max; ++k) d = std::max(d, delta(k));
    return d;
  }

  /// sup r(k)/k over [1, k_max].
  double linear_bound(int k_max) const {
    if (k_max < 1) throw InvalidArgument("linear_bound needs k_max >= 1");
    double s = 0.0;
    for (int k = 1; k <= k_max; ++k) s = std::max(s, (*this)(k) / k);
    return s;
  }

  /// Smallest k in [0, k_limit] with r(k) >= v, or nullopt. Monotone r, so
  /// binary search.
  std::optional<int> min_k_with_rate_at_least(double v, int k_limit) const {
    k_limit = std::min(k_limit, horizon_);
    if (v <= 0.0) return 0;
    if ((*this)(k_limit) < v) return std::nullopt;
    int lo = 0, hi = k_limit;  // r(lo) < v <= r(hi)
    while (hi - lo > 1) {
      int mid = lo + (hi - lo) / 2;
      ((*this)(mid) >= v ? hi : lo) = mid;
    }
    return hi;
  }

  /// Extend the R(.) cache so later big_r calls are read-only.
  void prepare(int k_max) const { ensure_prefix(std::min(k_max, horizon_)); }

 private:
  RateFunction() = default;

  void ensure_prefix(int k) const {
    if (k > horizon_)
      throw HorizonError("R(k) queried beyond horizon " + std::to_string(horizon_));
    if (prefix_.empty()) prefix_.push_back(0.0);
    while (static_cast<int>(prefix_.size()) <= k) {
      int i = static_cast<int>(prefix_.size());
      prefix_.push_back(prefix_.back() + 1.0 / (*this)(i));
    }
  }

  double alpha_ = 0.0;
  std::vector<double> table_;
  int horizon_ = 0;
  mutable std::vector<double> prefix_;  // prefix_[k] = R(k)
};

/// Conditions on r over [1, k_max]: monotone, finite sup r(k)/k, positive.
/// Unboundedness is declared, not checked.
inline RateValidationReport validate_rate(const RateFunction& rate, int k_max) {
  if (k_max < 1) throw InvalidArgument("validate_rate needs k_max >= 1");
  RateValidationReport rep;
  rep.valid = true;
  double prev = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    double rk = rate(k);
    if (rk < prev) {
      rep.valid = false;
      if (!rep.monotonicity_violation) rep.monotonicity_violation = k;
    }
    rep.sup_ratio = std::max(rep.sup_ratio, rk / k);
    prev = rk;
  }
  rep.message = rep.valid ? "ok"
                          : "monotonicity violated at k=" +
                                std::to_string(*rep.monotonicity_violation);
  return rep;
}

/// Model parameters: n sites, m particles, density bound rho >= m/n,
/// kappa = rho * sup r(k)/k (a uniform bound on the per-site arrival rate).
struct ModelSpec {
  RateFunction rate;
  int n = 0;
  int m = 0;
  double rho = 0.0;
  double kappa = 0.0;

  static ModelSpec make(RateFunction rate, int n, int m,
                        std::optional<double> rho = std::nullopt) {
    if (n < 2 || m < 1) throw InvalidArgument("ModelSpec needs n >= 2, m >= 1");
    double density = static_cast<double>(m) / n;
    double r = rho.value_or(density);
    if (r < density - 1e-12)
      throw InvalidArgument("rho must be at least m/n");
    int k_max = std::min(m, rate.horizon());
    if (k_max < m) throw HorizonError("rate horizon shorter than m");
    double lb = rate.linear_bound(m);
    rate.prepare(m);
    return ModelSpec{std::move(rate), n, m, r, r * lb};
  }
};

}  // namespace zrp

#endif
