#ifndef ZRP_COUPLING_HPP
#define ZRP_COUPLING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

#include "zrp/configuration.hpp"
#include "zrp/errors.hpp"
#include "zrp/probability.hpp"
#include "zrp/rate_function.hpp"
#include "zrp/rng.hpp"
#include "zrp/simulate.hpp"

namespace zrp {

/// Good = {phi^{theta2} <= L2 + 4}.
struct GoodSet {
  double theta2 = 0.0;
  double big_l2 = 0.0;

  bool contains(const Configuration& x) const {
    return phi_theta(x, theta2) <= big_l2 + 4.0;
  }
};

/// Tagged-particle jump increment Delta(k) = r(k+1) - r(k). A tag can sit on
/// a site holding all m background particles, which needs r(m+1); table rates
/// defined only up to m fall back to the last available increment (the rates
/// here are monotone, so this keeps the cap an upper bound for concave
/// tables and is flagged nowhere else).
inline double tag_delta(const ModelSpec& spec, int k) {
  try {
    return spec.rate.delta(k);
  } catch (const HorizonError&) {
    return spec.rate.delta(k - 1);
  }
}

/// Vertical cap for the Theta process: max Delta(k) over reachable tag
/// occupancies 0..m.
inline double tag_delta_cap(const ModelSpec& spec) {
  double d = 0.0;
  for (int k = 0; k <= spec.m; ++k) d = std::max(d, tag_delta(spec, k));
  return d;
}

/// One point of the shared Poisson process Theta driving both tags.
struct ThetaPoint {
  double t = 0.0;
  double level = 0.0;
  int dest = -1;
  bool i_applied = false;
  bool j_applied = false;
};

struct CoupledTrajectory {
  Trajectory base;  // background X (construction 1 events)
  std::vector<ThetaPoint> theta_stream;
  std::vector<std::pair<double, int>> i_path;  // (time, site), first at t=0
  std::vector<std::pair<double, int>> j_path;
  std::vector<double> suppressed;  // times of Good-suppressed X-moves
  Configuration final_x;  // background state when the run stopped
  double tau = std::numeric_limits<double>::infinity();
  bool coalesced = false;
  double delta_cap = 0.0;
  bool degenerate_delta = false;  // Delta == 0: tags can never move

  static int site_at(const std::vector<std::pair<double, int>>& path, double t) {
    int s = path.front().second;
    for (const auto& [tt, site] : path) {
      if (tt > t) break;
      s = site;
    }
    return s;
  }
  int i_at(double t) const { return site_at(i_path, t); }
  int j_at(double t) const { return site_at(j_path, t); }
};

struct CouplingOptions {
  std::optional<double> u_cap;      // background cap, default r(m)
  std::optional<double> delta_cap;  // Theta cap, default tag_delta_cap
  bool record = true;
  bool stop_at_tau = false;
};

namespace detail {

inline CoupledTrajectory run_coupled(const ModelSpec& spec,
                                     const std::optional<GoodSet>& good,
                                     const Configuration& x0, int tag_i,
                                     int tag_j, double t_end, std::uint64_t seed,
                                     std::uint64_t stream,
                                     const CouplingOptions& opt) {
  const int n = spec.n;
  if (x0.site_count() != n || x0.particle_count() != spec.m)
    throw InvalidArgument("start configuration does not match the model");
  if (tag_i < 0 || tag_i >= n || tag_j < 0 || tag_j >= n)
    throw InvalidArgument("tag sites out of range");
  if (good && !good->contains(x0))
    throw InvalidArgument("constrained start configuration is not good");

  CoupledTrajectory out;
  out.base.start = x0;
  out.base.t_end = t_end;
  out.base.seed = seed;
  out.base.engine = Engine::Construction1;
  double u_cap = opt.u_cap.value_or(spec.rate(spec.m));
  if (u_cap < spec.rate(spec.m))
    throw InvalidArgument("background cap must dominate r(m)");
  out.base.u_cap = u_cap;
  double d_cap = opt.delta_cap.value_or(tag_delta_cap(spec));
  if (d_cap < tag_delta_cap(spec) - 1e-12)
    throw InvalidArgument("Theta cap must dominate max Delta");
  out.delta_cap = d_cap;
  // Constant rates have Delta(k) = 0 for all k >= 1: tags move only while
  // alone, the regime the theory excludes. Flagged, not an error.
  double occupied_delta = 0.0;
  for (int k = 1; k <= spec.m; ++k)
    occupied_delta = std::max(occupied_delta, tag_delta(spec, k));
  out.degenerate_delta = occupied_delta <= 0.0;
  out.i_path.emplace_back(0.0, tag_i);
  out.j_path.emplace_back(0.0, tag_j);
  int ci = tag_i, cj = tag_j;
  if (ci == cj) {
    out.tau = 0.0;
    out.coalesced = true;
  }

  CounterRng rng(seed, stream);
  Configuration x = x0;
  const double bg_rate = n * u_cap;
  // Theta intensity (1/n)dt x du x Card over n destinations: total d_cap.
  const double total = bg_rate + d_cap;
  double t = 0.0;
  while (true) {
    t += rng.exponential(total);
    if (t > t_end) break;
    if (rng.uniform() * total <= bg_rate) {
      Event e;
      e.t = t;
      e.level = rng.uniform(0.0, u_cap);
      e.source = rng.uniform_int(n);
      e.dest = rng.uniform_int(n);
      e.applied = e.source != e.dest && e.level <= spec.rate(x[e.source]);
      if (e.applied && good && !good->contains(x.moved(e.source, e.dest))) {
        e.applied = false;
        if (opt.record) out.suppressed.push_back(t);
      }
      if (opt.record) out.base.events.push_back(e);
      if (e.applied) {
        --x[e.source];
        ++x[e.dest];
      }
    } else {
      ThetaPoint p;
      p.t = t;
      p.level = rng.uniform(0.0, d_cap);
      p.dest = rng.uniform_int(n);
      p.i_applied = p.level <= tag_delta(spec, x[ci]);
      p.j_applied = p.level <= tag_delta(spec, x[cj]);
      if (p.i_applied && p.dest != ci) out.i_path.emplace_back(t, p.dest);
      if (p.j_applied && p.dest != cj) out.j_path.emplace_back(t, p.dest);
      if (p.i_applied) ci = p.dest;
      if (p.j_applied) cj = p.dest;
      if (opt.record) out.theta_stream.push_back(p);
      if (!out.coalesced && ci == cj) {
        out.tau = t;
        out.coalesced = true;
        if (opt.stop_at_tau) break;
      }
    }
  }
  out.final_x = x;
  return out;
}

}  // namespace detail

/// Joint simulation of (X, I, J): X by construction 1, both tags driven by
/// the same Theta realization, so coalescence is absorbing.
inline CoupledTrajectory simulate_tagged_pair(const ModelSpec& spec,
                                              const Configuration& x, int i,
                                              int j, double t_end,
                                              std::uint64_t seed,
                                              std::uint64_t stream = 0,
                                              const CouplingOptions& opt = {}) {
  return detail::run_coupled(spec, std::nullopt, x, i, j, t_end, seed, stream,
                             opt);
}

/// Same event streams, but X-moves leaving Good are suppressed. With a
/// shared seed this coincides with simulate_tagged_pair strictly before the
/// first suppressed event.
inline CoupledTrajectory simulate_constrained(const ModelSpec& spec,
                                              const GoodSet& good,
                                              const Configuration& x, int i,
                                              int j, double t_end,
                                              std::uint64_t seed,
                                              std::uint64_t stream = 0,
                                              const CouplingOptions& opt = {}) {
  return detail::run_coupled(spec, good, x, i, j, t_end, seed, stream, opt);
}

/// T_1 = c2 (X_I(0) v X_J(0)) + 1; T_k = T_{k-1} + c2 (X_I(T_{k-1}) v
/// X_J(T_{k-1})) + 1. Truncated at t_end (partial schedule when censored).
inline std::vector<double> tk_schedule(const CoupledTrajectory& traj, double c2,
                                       int max_terms = 10000) {
  if (c2 < 0.0) throw InvalidArgument("tk_schedule needs c2 >= 0");
  std::vector<double> ts;
  double prev = 0.0;
  for (int k = 0; k < max_terms; ++k) {
    Configuration x = traj.base.state_at(prev);
    int hi = x[traj.i_at(prev)];
    int hj = x[traj.j_at(prev)];
    double next = prev + c2 * std::max(hi, hj) + 1.0;
    if (next > traj.base.t_end) break;
    ts.push_back(next);
    prev = next;
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Coalescence statistics

inline double default_tau_cap(const ModelSpec& spec) {
  return 20.0 * (spec.rate.big_r(spec.m) + std::log(static_cast<double>(spec.n)) + 1.0);
}

struct CoalescenceStats {
  std::vector<double> taus;  // censored paths recorded at time_cap
  long censored = 0;
  double time_cap = 0.0;
  double gamma = 0.0;
  MeanEstimate exp_moment;  // of e^{gamma min(tau, cap)}: a lower bound
  bool degenerate_delta = false;

  /// Empirical P(tau > t); requires t <= time_cap (censoring keeps it exact
  /// as an upper-tail count).
  double tail(double t) const {
    long c = 0;
    for (double v : taus)
      if (v > t) ++c;
    return static_cast<double>(c) / static_cast<double>(taus.size());
  }

  /// p-hat + 3 SE, the one-sided bound used against exact TV.
  double tail_upper(double t) const {
    double p = tail(t);
    double n = static_cast<double>(taus.size());
    return p + 3.0 * std::sqrt(p * (1.0 - p) / n);
  }
};

inline CoalescenceStats coalescence_statistics(
    const ModelSpec& spec, const Configuration& x, int i, int j, long paths,
    double gamma, std::uint64_t seed, std::optional<double> cap = std::nullopt) {
  CoalescenceStats stats;
  stats.time_cap = cap.value_or(default_tau_cap(spec));
  stats.gamma = gamma;
  CouplingOptions opt;
  opt.record = false;
  opt.stop_at_tau = true;
  std::vector<double> moments;
  moments.reserve(static_cast<std::size_t>(paths));
  for (long p = 0; p < paths; ++p) {
    CoupledTrajectory traj =
        simulate_tagged_pair(spec, x, i, j, stats.time_cap, seed,
                             path_stream(static_cast<std::uint64_t>(p)), opt);
    stats.degenerate_delta = traj.degenerate_delta;
    double tau = traj.coalesced ? traj.tau : stats.time_cap;
    if (!traj.coalesced) ++stats.censored;
    stats.taus.push_back(tau);
    moments.push_back(std::exp(gamma * tau));
  }
  if (stats.censored == paths && i != j)
    throw CapExceeded("all coalescence paths censored at the time cap");
  stats.exp_moment = mean_estimate(moments);
  return stats;
}

// ---------------------------------------------------------------------------
// Bubley-Dyer path coupling

struct PathStep {
  Configuration shared;  // z with m-1 particles
  int from = -1;         // step goes z + delta_from -> z + delta_to
  int to = -1;
};

/// Greedy shortest adjacent path from x to y: the site with the largest
/// excess donates to the site with the largest deficit (ties by index).
/// Length <= m and no intermediate state exceeds max(||x||, ||y||).
inline std::vector<PathStep> greedy_adjacent_path(const Configuration& x,
                                                  const Configuration& y) {
  if (x.site_count() != y.site_count() ||
      x.particle_count() != y.particle_count())
    throw InvalidArgument("path endpoints must share n and m");
  std::vector<PathStep> steps;
  Configuration cur = x;
  const int n = x.site_count();
  while (!(cur == y)) {
    int a = -1, b = -1;
    for (int s = 0; s < n; ++s) {
      int d = cur[s] - y[s];
      if (d > 0 && (a < 0 || d > cur[a] - y[a])) a = s;
      if (d < 0 && (b < 0 || d < cur[b] - y[b])) b = s;
    }
    PathStep step;
    step.shared = cur;
    --step.shared[a];
    step.from = a;
    step.to = b;
    steps.push_back(step);
    cur = cur.moved(a, b);
  }
  return steps;
}

struct PathCouplingBound {
  double bound = 0.0;
  std::vector<double> per_step;
  std::size_t path_length = 0;
};

/// Sum over a greedy adjacent path of the per-pair coupling bounds
/// P(tau > t) + 3 SE. Each adjacent pair (z + delta_a, z + delta_b) is
/// coupled with background spec reduced to m-1 particles.
inline PathCouplingBound path_coupling_tv_bound(const ModelSpec& spec,
                                                const Configuration& x,
                                                const Configuration& y,
                                                double t, long paths,
                                                std::uint64_t seed) {
  PathCouplingBound out;
  if (x == y) return out;
  if (spec.m < 1) throw InvalidArgument("path coupling needs m >= 1");
  ModelSpec reduced = ModelSpec::make(spec.rate, spec.n, spec.m - 1, spec.rho);
  std::vector<PathStep> steps = greedy_adjacent_path(x, y);
  out.path_length = steps.size();
  std::uint64_t salt = 0;
  for (const PathStep& s : steps) {
    double cap = std::max(default_tau_cap(reduced), t + 1.0);
    CoalescenceStats stats = coalescence_statistics(
        reduced, s.shared, s.from, s.to, paths, 0.0, seed + 0x9e3779b97f4a7c15ull * ++salt,
        cap);
    double b = stats.tail_upper(t);
    out.per_step.push_back(b);
    out.bound += b;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cooccupant-moment drift certification on Good x [n]

struct CooccupantDrift {
  double theta2 = 0.0;
  double a2 = 0.0;   // drift slope: L* phi* <= -a2 phi* + b2
  double b2 = 0.0;
  double c2 = 0.0;   // theta2 / a2
  double big_k = 0.0;  // 2 (b2 / a2 + 1)
  long states_scanned = 0;
};

/// phi*(x, i) = e^{theta2 x_i}; L* is the Good-constrained generator with the
/// tag term. Exhaustive evaluation over Good x [n].
inline double constrained_generator_phi_star(const ModelSpec& spec,
                                             const GoodSet& good,
                                             const Configuration& x, int i) {
  const int n = spec.n;
  const double th = good.theta2;
  double phix = std::exp(th * x[i]);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    if (x[k] == 0) continue;
    double rk = spec.rate(x[k]) / n;
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      if (!good.contains(x.moved(k, l))) continue;
      double after = std::exp(th * (x[i] - (k == i ? 1 : 0) + (l == i ? 1 : 0)));
      acc += rk * (after - phix);
    }
  }
  double di = tag_delta(spec, x[i]);
  for (int jj = 0; jj < n; ++jj)
    acc += di / n * (std::exp(th * x[jj]) - phix);
  return acc;
}

/// Certifies L* phi* <= -a2 phi* + b2 for a caller-chosen a2 > 0 by taking
/// b2 = max over Good x [n] of L* phi* + a2 phi*.
inline CooccupantDrift certify_cooccupant_drift(const ModelSpec& spec,
                                                const GoodSet& good, double a2,
                                                std::uint64_t state_cap = 200000) {
  if (!(a2 > 0.0)) throw InvalidArgument("certify_cooccupant_drift needs a2 > 0");
  StateIndex index(spec.n, spec.m);
  if (index.size() > state_cap)
    throw CapExceeded("state space too large for exhaustive certification");
  CooccupantDrift d;
  d.theta2 = good.theta2;
  d.a2 = a2;
  double b2 = 0.0;
  for (std::uint64_t s = 0; s < index.size(); ++s) {
    Configuration x = index.unrank(s);
    if (!good.contains(x)) continue;
    ++d.states_scanned;
    for (int i = 0; i < spec.n; ++i) {
      double v = constrained_generator_phi_star(spec, good, x, i) +
                 a2 * std::exp(good.theta2 * x[i]);
      b2 = std::max(b2, v);
    }
  }
  if (d.states_scanned == 0)
    throw InvalidArgument("Good set is empty on this state space");
  d.b2 = b2;
  d.c2 = good.theta2 / a2;
  d.big_k = 2.0 * (b2 / a2 + 1.0);
  return d;
}

/// Picks a2 from a geometric grid, minimizing the effective T_k budget
/// c2 * (1 + log(K) / theta2) (horizon times occupancy scale).
inline CooccupantDrift choose_cooccupant_drift(const ModelSpec& spec,
                                               const GoodSet& good,
                                               std::uint64_t state_cap = 200000) {
  CooccupantDrift best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int p = -6; p <= 8; ++p) {
    double a2 = std::pow(2.0, p);
    CooccupantDrift d = certify_cooccupant_drift(spec, good, a2, state_cap);
    double score = d.c2 * (1.0 + std::log(std::max(d.big_k, 1.0)) / good.theta2);
    if (score < best_score) {
      best_score = score;
      best = d;
    }
  }
  return best;
}

}  // namespace zrp

#endif
