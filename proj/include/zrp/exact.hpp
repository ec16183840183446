#ifndef ZRP_EXACT_HPP
#define ZRP_EXACT_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "zrp/configuration.hpp"
#include "zrp/errors.hpp"
#include "zrp/geometry.hpp"
#include "zrp/rate_function.hpp"

namespace zrp {

/// (1/2) sum |mu - nu|.
inline double tv_distance(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  if (mu.size() != nu.size()) throw InvalidArgument("TV: dimension mismatch");
  if (std::abs(mu.sum() - 1.0) > 1e-9 || std::abs(nu.sum() - 1.0) > 1e-9)
    throw InvalidArgument("TV: inputs must be probability vectors");
  return 0.5 * (mu - nu).cwiseAbs().sum();
}

struct MixingCurve {
  Configuration start;
  std::vector<double> times;
  std::vector<double> tv_values;
  double epsilon = 0.25;
  double t_mix = 0.0;
};

/// Enumerated finite-state model: stationary law, sparse generator,
/// transient distributions by uniformization, spectral quantities.
class ExactModel {
 public:
  ExactModel(ModelSpec spec, Geometry geometry, std::uint64_t state_cap = 200000)
      : spec_(std::move(spec)),
        geometry_(std::move(geometry)),
        index_(spec_.n, spec_.m) {
    if (index_.size() > state_cap)
      throw CapExceeded("|Omega| = " + std::to_string(index_.size()) +
                        " exceeds cap " + std::to_string(state_cap));
    if (!geometry_.is_mean_field() &&
        geometry_.matrix().rows() != spec_.n)
      throw InvalidArgument("geometry size does not match n");
    build_stationary();
    build_generator();
  }

  const ModelSpec& spec() const { return spec_; }
  const Geometry& geometry() const { return geometry_; }
  const StateIndex& index() const { return index_; }
  std::uint64_t states() const { return index_.size(); }

  /// pi(x) propto prod_i prod_{k<=x_i} 1/r(k); independent of the geometry.
  const Eigen::VectorXd& stationary() const { return pi_; }

  /// Q with off-diagonal jump rates and diagonal = -row sum.
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& generator() const {
    return q_;
  }

  double uniformization_rate() const { return lambda_; }

  Eigen::VectorXd point_mass(const Configuration& x) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states()));
    v(static_cast<Eigen::Index>(index_.rank(x))) = 1.0;
    return v;
  }

  /// mu e^{tQ} by uniformization, Poisson tail truncated at mass 1e-13.
  Eigen::VectorXd evolve(Eigen::VectorXd mu, double t) const {
    if (t < 0.0) throw InvalidArgument("evolve needs t >= 0");
    if (t == 0.0 || lambda_ == 0.0) return mu;
    const double lt = lambda_ * t;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mu.size());
    double cumulative = 0.0;
    long k = 0;
    while (true) {
      double w = std::exp(k * std::log(lt) - lt - std::lgamma(k + 1.0));
      out += w * mu;
      cumulative += w;
      if (cumulative >= 1.0 - 1e-13) break;
      // Past the mode the weights decay geometrically; once they are far below
      // the rounding noise of `cumulative` the remaining tail is negligible and
      // the final normalization absorbs it.
      if (k > lt && w < 1e-17) break;
      // mu <- mu (I + Q/Lambda)
      mu += (qt_ * mu) / lambda_;
      ++k;
      if (k > 100000) throw NumericalError("uniformization did not converge");
    }
    return out / cumulative;
  }

  Eigen::VectorXd distribution_at(const Configuration& x, double t) const {
    return evolve(point_mass(x), t);
  }

  double tv_to_stationary(const Configuration& x, double t) const {
    return tv_distance(distribution_at(x, t), pi_);
  }

  /// First t with TV(P_x^t, pi) <= eps, bisected to relative tol.
  double mixing_time(const Configuration& x, double epsilon,
                     double rel_tol = 1e-3) const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw InvalidArgument("mixing_time needs epsilon in (0,1)");
    if (tv_to_stationary(x, 0.0) <= epsilon) return 0.0;
    double hi = std::max(1.0, spec_.rate.big_r(spec_.m));
    int guard = 0;
    while (tv_to_stationary(x, hi) > epsilon) {
      hi *= 2.0;
      if (++guard > 60) throw NumericalError("mixing time bracket not found");
    }
    double lo = 0.0;
    while (hi - lo > rel_tol * hi) {
      double mid = 0.5 * (lo + hi);
      (tv_to_stationary(x, mid) <= epsilon ? hi : lo) = mid;
    }
    return hi;
  }

  /// max_x t_mix(x; eps): exhaustive when |Omega| is small, otherwise the
  /// extreme state (m, 0, ..., 0). The extreme-state shortcut follows the
  /// dependence of the mixing time on the sup norm; it is a heuristic, not
  /// an exact maximizer at finite n.
  double worst_case_mixing_time(double epsilon,
                                std::uint64_t exhaustive_cap = 2000) const {
    if (states() <= exhaustive_cap) {
      double worst = 0.0;
      for (std::uint64_t s = 0; s < states(); ++s)
        worst = std::max(worst, mixing_time(index_.unrank(s), epsilon));
      return worst;
    }
    return mixing_time(all_at_site(spec_.n, spec_.m), epsilon);
  }

  MixingCurve mixing_curve(const Configuration& x, std::vector<double> times,
                           double epsilon = 0.25) const {
    MixingCurve c;
    c.start = x;
    c.epsilon = epsilon;
    c.times = std::move(times);
    for (double t : c.times) c.tv_values.push_back(tv_to_stationary(x, t));
    c.t_mix = mixing_time(x, epsilon);
    return c;
  }

  /// Smallest nonzero eigenvalue of the symmetrized -Q in L^2(pi); equals
  /// the Poincare constant (the Dirichlet form only sees the symmetric
  /// part).
  double spectral_gap() const {
    if (gap_) return *gap_;
    const auto n = static_cast<Eigen::Index>(states());
    if (n > 6000) throw CapExceeded("dense eigensolve cap exceeded");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd sqrt_pi = pi_.cwiseSqrt();
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(q_, r);
           it; ++it)
        a(r, it.col()) = -it.value() * sqrt_pi(r) / sqrt_pi(it.col());
    Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    if (n > 1 && es.eigenvalues()(1) < 1e-12)
      throw NumericalError("spectral gap ~ 0 flags reducibility");
    gap_ = es.eigenvalues()(1);
    return *gap_;
  }

  /// E(phi,phi)/Var(phi) under pi; >= spectral gap for non-constant phi.
  double dirichlet_quotient(const Eigen::VectorXd& phi) const {
    Eigen::VectorXd qphi = q_ * phi;
    double energy = 0.0, mean = 0.0, second = 0.0;
    for (Eigen::Index s = 0; s < phi.size(); ++s) {
      energy -= pi_(s) * phi(s) * qphi(s);
      mean += pi_(s) * phi(s);
      second += pi_(s) * phi(s) * phi(s);
    }
    double var = second - mean * mean;
    if (var <= 0.0) throw InvalidArgument("dirichlet_quotient needs non-constant phi");
    return energy / var;
  }

  /// P(x_1 = k) for k = 0..m.
  std::vector<double> single_site_marginal() const {
    std::vector<double> marg(static_cast<std::size_t>(spec_.m) + 1, 0.0);
    for (std::uint64_t s = 0; s < states(); ++s)
      marg[static_cast<std::size_t>(index_.unrank(s)[0])] +=
          pi_(static_cast<Eigen::Index>(s));
    return marg;
  }

  /// Checks pi(x_1=k)/pi(x_1=k-1) < q/r(k) with q = 2 r(ceil(2 rho)).
  struct DecayCheck {
    bool ok = true;
    double q = 0.0;
    std::optional<int> violation;
  };
  DecayCheck geometric_decay_check() const {
    DecayCheck c;
    c.q = 2.0 * spec_.rate(static_cast<int>(std::ceil(2.0 * spec_.rho)));
    auto marg = single_site_marginal();
    for (int k = 1; k <= spec_.m; ++k) {
      double lhs = marg[static_cast<std::size_t>(k)] * spec_.rate(k);
      double rhs = c.q * marg[static_cast<std::size_t>(k) - 1];
      if (lhs >= rhs) {
        c.ok = false;
        if (!c.violation) c.violation = k;
      }
    }
    return c;
  }

  /// Pointwise (Q phi) for an observable given as a function of states.
  template <typename F>
  Eigen::VectorXd observable(F&& f) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(states()));
    for (std::uint64_t s = 0; s < states(); ++s)
      v(static_cast<Eigen::Index>(s)) = f(index_.unrank(s));
    return v;
  }

  double max_row_sum_error() const {
    double e = 0.0;
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(states()));
    e = (q_ * ones).cwiseAbs().maxCoeff();
    return e;
  }

  double max_detailed_balance_error() const {
    double e = 0.0;
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(states()); ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(q_, r);
           it; ++it) {
        if (it.col() == r) continue;
        double fwd = pi_(r) * it.value();
        double bwd = pi_(it.col()) * q_.coeff(it.col(), r);
        e = std::max(e, std::abs(fwd - bwd));
      }
    return e;
  }

  double max_stationarity_error() const {
    return (qt_ * pi_).cwiseAbs().maxCoeff();  // qt_ pi = (pi Q)^T
  }

 private:
  void build_stationary() {
    // log weights; a single max shift before exponentiation.
    std::vector<double> cum_log_r(static_cast<std::size_t>(spec_.m) + 1, 0.0);
    for (int k = 1; k <= spec_.m; ++k)
      cum_log_r[static_cast<std::size_t>(k)] =
          cum_log_r[static_cast<std::size_t>(k) - 1] + std::log(spec_.rate(k));
    const auto n_states = static_cast<Eigen::Index>(index_.size());
    Eigen::VectorXd logw(n_states);
    for (Eigen::Index s = 0; s < n_states; ++s) {
      Configuration x = index_.unrank(static_cast<std::uint64_t>(s));
      double lw = 0.0;
      for (int xi : x.occupancies) lw -= cum_log_r[static_cast<std::size_t>(xi)];
      logw(s) = lw;
    }
    double shift = logw.maxCoeff();
    pi_ = (logw.array() - shift).exp();
    pi_ /= pi_.sum();
  }

  void build_generator() {
    const auto n_states = static_cast<Eigen::Index>(index_.size());
    std::vector<Eigen::Triplet<double>> trip;
    double max_exit = 0.0;
    for (Eigen::Index s = 0; s < n_states; ++s) {
      Configuration x = index_.unrank(static_cast<std::uint64_t>(s));
      double exit = 0.0;
      for (int i = 0; i < spec_.n; ++i) {
        if (x[i] == 0) continue;
        double ri = spec_.rate(x[i]);
        for (int j = 0; j < spec_.n; ++j) {
          if (j == i) continue;  // self-loops are no-ops, kept out of Q
          double rate = geometry_.is_mean_field()
                            ? ri / spec_.n
                            : ri * geometry_.matrix()(i, j);
          if (rate == 0.0) continue;
          auto target = static_cast<Eigen::Index>(index_.rank(x.moved(i, j)));
          trip.emplace_back(s, target, rate);
          exit += rate;
        }
      }
      trip.emplace_back(s, s, -exit);
      max_exit = std::max(max_exit, exit);
    }
    q_.resize(n_states, n_states);
    q_.setFromTriplets(trip.begin(), trip.end());
    qt_ = Eigen::SparseMatrix<double>(q_.transpose());
    lambda_ = max_exit;
  }

  ModelSpec spec_;
  Geometry geometry_;
  StateIndex index_;
  Eigen::VectorXd pi_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> q_;
  Eigen::SparseMatrix<double> qt_;
  double lambda_ = 0.0;
  mutable std::optional<double> gap_;
};

struct DriftReport {
  bool certified = false;      // a finite c exists on the horizon
  int c = 0;                   // smallest occupancy with r(c) large enough
  double big_l = 0.0;          // L = 2 e^{theta c}
  double required_rate = 0.0;  // the bound r(c) had to clear
  bool verified = false;       // state-by-state inequality held on Omega
  double max_violation = 0.0;
};

/// Finds the smallest c with (e^t - 1) kappa - (1 - e^{-t}) r(c)/2 <= -beta,
/// sets L = 2 e^{theta c}, then verifies
///   (Q phi^theta)(x) <= -beta phi^theta(x) + ((e^theta - 1) kappa + beta) L
/// on every state. The degenerate beta = 0 case fixes c = 0, L = 2 and
/// verifies the unconditional bound (Q phi^theta)(x) <= (e^theta-1) kappa
/// phi^theta(x) instead.
inline DriftReport drift_check(const ExactModel& model, double theta, double beta,
                               double tol = 1e-9) {
  if (!(theta > 0.0) || beta < 0.0)
    throw InvalidArgument("drift_check needs theta > 0, beta >= 0");
  const ModelSpec& spec = model.spec();
  DriftReport rep;
  const double growth = (std::exp(theta) - 1.0) * spec.kappa;
  if (beta == 0.0) {
    rep.certified = true;
    rep.c = 0;
    rep.big_l = 2.0;
    rep.required_rate = 0.0;
  } else {
    rep.required_rate = 2.0 * (growth + beta) / (1.0 - std::exp(-theta));
    int limit = spec.rate.is_power()
                    ? 1000000000
                    : spec.rate.horizon();
    auto c = spec.rate.min_k_with_rate_at_least(rep.required_rate, limit);
    if (!c) return rep;  // no finite c on the horizon
    rep.certified = true;
    rep.c = *c;
    if (theta * rep.c > 700.0)
      throw SaturationError("drift_check: L overflows the exponent cap");
    rep.big_l = 2.0 * std::exp(theta * rep.c);
  }
  Eigen::VectorXd phi =
      model.observable([&](const Configuration& x) { return phi_theta(x, theta); });
  Eigen::VectorXd lphi = model.generator() * phi;
  rep.verified = true;
  for (Eigen::Index s = 0; s < phi.size(); ++s) {
    double bound = beta == 0.0 ? growth * phi(s)
                               : -beta * phi(s) + (growth + beta) * rep.big_l;
    double slack = lphi(s) - bound;
    rep.max_violation = std::max(rep.max_violation, slack);
    if (slack > tol) rep.verified = false;
  }
  return rep;
}

struct SandwichResult {
  double lower = 0.0;   // lambda*(L), mean-field
  double middle = 0.0;  // lambda*(L^P) / lambda*(P)
  double upper = 0.0;   // (1 - 1/n) E_pi[r(X_1)] / Var_pi[X_1]
  bool ordered = false;
};

/// Comparison sandwich for the Poincare constant in an arbitrary doubly
/// stochastic geometry.
inline SandwichResult hermon_salez_sandwich(const ModelSpec& spec,
                                            const Eigen::MatrixXd& p,
                                            double tol = 1e-9) {
  ExactModel mean_field(spec, Geometry::mean_field());
  ExactModel with_p(spec, Geometry::matrix(p));
  SandwichResult r;
  r.lower = mean_field.spectral_gap();
  r.middle = with_p.spectral_gap() / walk_spectral_gap(p);
  double mean_rate = 0.0, mean_occ = 0.0, second = 0.0;
  const auto& pi = mean_field.stationary();
  for (std::uint64_t s = 0; s < mean_field.states(); ++s) {
    int x1 = mean_field.index().unrank(s)[0];
    double w = pi(static_cast<Eigen::Index>(s));
    mean_rate += w * spec.rate(x1);
    mean_occ += w * x1;
    second += w * static_cast<double>(x1) * x1;
  }
  double var = second - mean_occ * mean_occ;
  r.upper = (1.0 - 1.0 / spec.n) * mean_rate / var;
  r.ordered = r.lower <= r.middle + tol && r.middle <= r.upper + tol;
  return r;
}

}  // namespace zrp

#endif
