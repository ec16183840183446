#ifndef ZRP_SIMULATE_HPP
#define ZRP_SIMULATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "zrp/configuration.hpp"
#include "zrp/errors.hpp"
#include "zrp/geometry.hpp"
#include "zrp/probability.hpp"
#include "zrp/rate_function.hpp"
#include "zrp/rng.hpp"

namespace zrp {

enum class Engine { Construction1, Construction2, Gillespie };

inline const char* engine_name(Engine e) {
  switch (e) {
    case Engine::Construction1: return "c1";
    case Engine::Construction2: return "c2";
    case Engine::Gillespie: return "gillespie";
  }
  return "?";
}

/// One candidate event of a graphical construction. Thinned candidates and
/// self-loops are recorded with applied = false; the couplings need them.
struct Event {
  double t = 0.0;
  int source = -1;  // -1 when construction 2 thins the point (no source matched)
  int dest = -1;
  double level = 0.0;  // vertical coordinate u of the Poisson point
  bool applied = false;
};

struct Trajectory {
  Configuration start;
  std::vector<Event> events;
  double t_end = 0.0;
  std::uint64_t seed = 0;
  Engine engine = Engine::Construction1;
  double u_cap = 0.0;  // vertical cap used by the thinning constructions

  Configuration state_at(double t) const {
    Configuration x = start;
    for (const Event& e : events) {
      if (e.t > t) break;
      if (e.applied) {
        --x[e.source];
        ++x[e.dest];
      }
    }
    return x;
  }

  Configuration final_state() const { return state_at(t_end); }

  /// Gain counter G_i(t): applied arrivals at site i up to time t.
  int gain(int i, double t) const {
    int g = 0;
    for (const Event& e : events)
      if (e.t <= t && e.applied && e.dest == i) ++g;
    return g;
  }

  /// Loss counter L_i(t): applied departures from site i up to time t.
  int loss(int i, double t) const {
    int l = 0;
    for (const Event& e : events)
      if (e.t <= t && e.applied && e.source == i) ++l;
    return l;
  }
};

namespace detail {

/// Visitor signature: void(const Configuration& before, const Event&).
template <typename Visitor>
Configuration run_construction1(const ModelSpec& spec, Configuration x,
                                double t_end, CounterRng& rng, double u_cap,
                                Visitor&& visit) {
  const int n = spec.n;
  const double total_rate = n * u_cap;
  double t = 0.0;
  while (true) {
    t += rng.exponential(total_rate);
    if (t > t_end) break;
    Event e;
    e.t = t;
    e.level = rng.uniform(0.0, u_cap);
    e.source = rng.uniform_int(n);
    e.dest = rng.uniform_int(n);
    e.applied = e.source != e.dest && e.level <= spec.rate(x[e.source]);
    visit(x, e);
    if (e.applied) {
      --x[e.source];
      ++x[e.dest];
    }
  }
  return x;
}

template <typename Visitor>
Configuration run_construction2(const ModelSpec& spec, Configuration x,
                                double t_end, CounterRng& rng, double u_cap,
                                Visitor&& visit) {
  const int n = spec.n;
  const double total_rate = n * u_cap;
  double t = 0.0;
  while (true) {
    t += rng.exponential(total_rate);
    if (t > t_end) break;
    Event e;
    e.t = t;
    e.dest = rng.uniform_int(n);
    e.level = rng.uniform(0.0, u_cap);
    // cumulative-rate interval test for the source
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += spec.rate(x[i]) / n;
      if (e.level <= acc) {
        e.source = i;
        break;
      }
    }
    e.applied = e.source >= 0 && e.source != e.dest;
    visit(x, e);
    if (e.applied) {
      --x[e.source];
      ++x[e.dest];
    }
  }
  return x;
}

template <typename Visitor>
Configuration run_gillespie(const ModelSpec& spec, const Geometry& geom,
                            Configuration x, double t_end, CounterRng& rng,
                            Visitor&& visit) {
  const int n = spec.n;
  const bool mf = geom.is_mean_field();
  double t = 0.0;
  std::vector<double> w(static_cast<std::size_t>(n));
  while (true) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double out = mf ? (n - 1.0) / n : 1.0 - geom.matrix()(i, i);
      w[static_cast<std::size_t>(i)] = spec.rate(x[i]) * out;
      total += w[static_cast<std::size_t>(i)];
    }
    if (total <= 0.0) break;  // unreachable for m >= 1, guarded anyway
    t += rng.exponential(total);
    if (t > t_end) break;
    Event e;
    e.t = t;
    double pick = rng.uniform() * total;
    double acc = 0.0;
    e.source = n - 1;
    for (int i = 0; i < n; ++i) {
      acc += w[static_cast<std::size_t>(i)];
      if (pick <= acc) {
        e.source = i;
        break;
      }
    }
    if (mf) {
      int j = rng.uniform_int(n - 1);
      e.dest = j >= e.source ? j + 1 : j;
    } else {
      const auto& p = geom.matrix();
      double mass = 1.0 - p(e.source, e.source);
      double pick_j = rng.uniform() * mass;
      double acc_j = 0.0;
      e.dest = e.source;
      for (int j = 0; j < n; ++j) {
        if (j == e.source) continue;
        acc_j += p(e.source, j);
        if (pick_j <= acc_j) {
          e.dest = j;
          break;
        }
      }
    }
    e.applied = true;
    visit(x, e);
    --x[e.source];
    ++x[e.dest];
  }
  return x;
}

}  // namespace detail

struct SimOptions {
  std::optional<double> u_cap;  // default r(m) for construction 1, kappa for 2
  Geometry geometry = Geometry::mean_field();  // Gillespie only
};

inline double default_u_cap(const ModelSpec& spec, Engine engine) {
  return engine == Engine::Construction2 ? spec.kappa : spec.rate(spec.m);
}

/// Runs one path with a visitor; returns the final configuration.
template <typename Visitor>
Configuration simulate_visit(const ModelSpec& spec, Engine engine,
                             const Configuration& x, double t_end,
                             CounterRng& rng, Visitor&& visit,
                             const SimOptions& opt = {}) {
  if (x.site_count() != spec.n || x.particle_count() != spec.m)
    throw InvalidArgument("start configuration does not match the model");
  if (t_end < 0.0) throw InvalidArgument("t_end must be >= 0");
  double cap = opt.u_cap.value_or(default_u_cap(spec, engine));
  switch (engine) {
    case Engine::Construction1:
      if (cap < spec.rate(spec.m))
        throw InvalidArgument("construction 1 needs u_cap >= r(m)");
      return detail::run_construction1(spec, x, t_end, rng, cap,
                                       std::forward<Visitor>(visit));
    case Engine::Construction2:
      if (cap < spec.kappa - 1e-12)
        throw InvalidArgument("construction 2 needs u_cap >= kappa");
      return detail::run_construction2(spec, x, t_end, rng, cap,
                                       std::forward<Visitor>(visit));
    case Engine::Gillespie:
      return detail::run_gillespie(spec, opt.geometry, x, t_end, rng,
                                   std::forward<Visitor>(visit));
  }
  throw InvalidArgument("unknown engine");
}

/// Full event-recording simulation.
inline Trajectory simulate(const ModelSpec& spec, Engine engine,
                           const Configuration& x, double t_end,
                           std::uint64_t seed, const SimOptions& opt = {}) {
  Trajectory traj;
  traj.start = x;
  traj.t_end = t_end;
  traj.seed = seed;
  traj.engine = engine;
  traj.u_cap = engine == Engine::Gillespie
                   ? 0.0
                   : opt.u_cap.value_or(default_u_cap(spec, engine));
  CounterRng rng(seed);
  simulate_visit(spec, engine, x, t_end, rng,
                 [&](const Configuration&, const Event& e) {
                   traj.events.push_back(e);
                 },
                 opt);
  return traj;
}

/// Endpoint-only simulation (no event storage).
inline Configuration sample_endpoint(const ModelSpec& spec, Engine engine,
                                     const Configuration& x, double t_end,
                                     CounterRng& rng, const SimOptions& opt = {}) {
  return simulate_visit(spec, engine, x, t_end, rng,
                        [](const Configuration&, const Event&) {}, opt);
}

/// Empirical law of X(t) over the enumerated state space.
inline Eigen::VectorXd empirical_law(const ModelSpec& spec, Engine engine,
                                     const Configuration& x, double t, long paths,
                                     std::uint64_t seed, const StateIndex& index,
                                     const SimOptions& opt = {}) {
  Eigen::VectorXd freq =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index.size()));
  for (long p = 0; p < paths; ++p) {
    CounterRng rng(seed, path_stream(static_cast<std::uint64_t>(p)));
    Configuration y = sample_endpoint(spec, engine, x, t, rng, opt);
    freq(static_cast<Eigen::Index>(index.rank(y))) += 1.0;
  }
  return freq / static_cast<double>(paths);
}

// ---------------------------------------------------------------------------
// Observables along paths

/// (L phi)(x) for the mean-field generator, evaluated pointwise.
template <typename F>
double generator_apply_mean_field(const ModelSpec& spec, const Configuration& x,
                                  F&& phi) {
  double acc = 0.0;
  double phix = phi(x);
  for (int i = 0; i < spec.n; ++i) {
    if (x[i] == 0) continue;
    double ri = spec.rate(x[i]) / spec.n;
    for (int j = 0; j < spec.n; ++j) {
      if (j == i) continue;
      acc += ri * (phi(x.moved(i, j)) - phix);
    }
  }
  return acc;
}

/// Integrand of the predictable quadratic variation: sum over moves of
/// rate * (phi(y) - phi(x))^2.
template <typename F>
double carre_du_champ_mean_field(const ModelSpec& spec, const Configuration& x,
                                 F&& phi) {
  double acc = 0.0;
  double phix = phi(x);
  for (int i = 0; i < spec.n; ++i) {
    if (x[i] == 0) continue;
    double ri = spec.rate(x[i]) / spec.n;
    for (int j = 0; j < spec.n; ++j) {
      if (j == i) continue;
      double d = phi(x.moved(i, j)) - phix;
      acc += ri * d * d;
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Hitting times

struct HittingRecord {
  double time = 0.0;
  bool censored = false;
};

/// First time the predicate holds, scanning t = 0 and every applied event.
template <typename Pred>
HittingRecord hitting_time(const ModelSpec& spec, Engine engine,
                           const Configuration& x, Pred&& pred, CounterRng& rng,
                           double time_cap) {
  if (pred(x)) return {0.0, false};
  HittingRecord rec{time_cap, true};
  simulate_visit(spec, engine, x, time_cap, rng,
                 [&](const Configuration& before, const Event& e) {
                   if (rec.censored && e.applied) {
                     Configuration after = before.moved(e.source, e.dest);
                     if (pred(after)) {
                       rec.time = e.t;
                       rec.censored = false;
                     }
                   }
                 });
  return rec;
}

struct ExpMomentEstimate {
  MeanEstimate raw;       // sample mean of e^{beta (T ^ cap)}
  long censored = 0;      // censored paths make the estimate a lower bound
  double time_cap = 0.0;
};

/// Monte Carlo E_x[e^{beta T}] for T the hitting time of pred. Censored
/// paths contribute e^{beta cap}, so the estimate is a conservative lower
/// bound for upper-bound checks.
template <typename Pred>
ExpMomentEstimate exp_moment_estimate(const ModelSpec& spec, Engine engine,
                                      const Configuration& x, Pred&& pred,
                                      double beta, long paths, std::uint64_t seed,
                                      double time_cap) {
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(paths));
  ExpMomentEstimate out;
  out.time_cap = time_cap;
  for (long p = 0; p < paths; ++p) {
    CounterRng rng(seed, path_stream(static_cast<std::uint64_t>(p)));
    HittingRecord rec = hitting_time(spec, engine, x, pred, rng, time_cap);
    if (rec.censored) ++out.censored;
    vals.push_back(std::exp(beta * rec.time));
  }
  out.raw = mean_estimate(vals);
  return out;
}

// ---------------------------------------------------------------------------
// Martingale diagnostics

struct MartingaleStats {
  std::vector<double> times;
  std::vector<MeanEstimate> m_value;       // M(t) across paths
  std::vector<MeanEstimate> m2_minus_qv;   // M(t)^2 - <M,M>_t across paths
};

/// Checks that M(t) = phi(X(t)) - phi(x) - int_0^t L phi(X(u)) du is
/// zero-mean and that E[M^2] matches the predictable variation. Integrals
/// of the piecewise-constant integrands are exact sums of value * duration.
template <typename F>
MartingaleStats martingale_diagnostics(const ModelSpec& spec,
                                       const Configuration& x,
                                       F&& phi, std::vector<double> times,
                                       long paths, std::uint64_t seed,
                                       Engine engine = Engine::Gillespie) {
  MartingaleStats stats;
  stats.times = std::move(times);
  const std::size_t nt = stats.times.size();
  std::vector<std::vector<double>> m_samples(nt), q_samples(nt);
  for (long p = 0; p < paths; ++p) {
    CounterRng rng(seed, path_stream(static_cast<std::uint64_t>(p)));
    double phi0 = phi(x);
    Configuration cur = x;
    double t_prev = 0.0;
    double int_lphi = 0.0, int_qv = 0.0;
    double lphi_cur = generator_apply_mean_field(spec, cur, phi);
    double qv_cur = carre_du_champ_mean_field(spec, cur, phi);
    std::size_t next_sample = 0;
    auto flush_until = [&](double t) {
      while (next_sample < nt && stats.times[next_sample] <= t) {
        double ts = stats.times[next_sample];
        double l = int_lphi + lphi_cur * (ts - t_prev);
        double q = int_qv + qv_cur * (ts - t_prev);
        double m = phi(cur) - phi0 - l;
        m_samples[next_sample].push_back(m);
        q_samples[next_sample].push_back(m * m - q);
        ++next_sample;
      }
    };
    double t_end = stats.times.empty() ? 0.0 : stats.times.back();
    simulate_visit(spec, engine, x, t_end, rng,
                   [&](const Configuration& before, const Event& e) {
                     if (!e.applied) return;
                     flush_until(e.t);
                     int_lphi += lphi_cur * (e.t - t_prev);
                     int_qv += qv_cur * (e.t - t_prev);
                     t_prev = e.t;
                     cur = before.moved(e.source, e.dest);
                     lphi_cur = generator_apply_mean_field(spec, cur, phi);
                     qv_cur = carre_du_champ_mean_field(spec, cur, phi);
                   });
    flush_until(t_end);
  }
  for (std::size_t s = 0; s < nt; ++s) {
    stats.m_value.push_back(mean_estimate(m_samples[s]));
    stats.m2_minus_qv.push_back(mean_estimate(q_samples[s]));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Path event probabilities

enum class PathEvent {
  SupNormAt,    // ||X(t)||_inf >= a
  SupNormPath,  // sup_{s <= t} ||X(s)||_inf > a
  PhiExceed,    // sup_{s in [T, t]} phi^theta(X(s)) > L + 4, T = hit {phi <= L}
};

struct EventQuery {
  PathEvent kind = PathEvent::SupNormAt;
  double a = 0.0;
  double theta = 0.0;
  double big_l = 0.0;
};

inline WilsonInterval event_probability(const ModelSpec& spec, Engine engine,
                                        const Configuration& x,
                                        const EventQuery& query, double t,
                                        long paths, std::uint64_t seed) {
  long hits = 0;
  for (long p = 0; p < paths; ++p) {
    CounterRng rng(seed, path_stream(static_cast<std::uint64_t>(p)));
    bool hit = false;
    switch (query.kind) {
      case PathEvent::SupNormAt: {
        Configuration y = sample_endpoint(spec, engine, x, t, rng);
        hit = y.max_occupancy() >= query.a;
        break;
      }
      case PathEvent::SupNormPath: {
        hit = x.max_occupancy() > query.a;
        simulate_visit(spec, engine, x, t, rng,
                       [&](const Configuration& before, const Event& e) {
                         if (e.applied && !hit &&
                             before[e.dest] + 1 > query.a)
                           hit = true;
                       });
        break;
      }
      case PathEvent::PhiExceed: {
        bool entered = phi_theta(x, query.theta) <= query.big_l;
        hit = entered && phi_theta(x, query.theta) > query.big_l + 4.0;
        simulate_visit(spec, engine, x, t, rng,
                       [&](const Configuration& before, const Event& e) {
                         if (!e.applied || hit) return;
                         double v = phi_theta(before.moved(e.source, e.dest),
                                              query.theta);
                         if (!entered) {
                           if (v <= query.big_l) entered = true;
                         } else if (v > query.big_l + 4.0) {
                           hit = true;
                         }
                       });
        break;
      }
    }
    if (hit) ++hits;
  }
  return wilson_interval(hits, paths);
}

// ---------------------------------------------------------------------------
// Pathwise effect-of-arrivals check (construction 1 trajectories)

struct EmptyingReport {
  bool ok = true;
  std::vector<double> stopping_times;  // T_0 .. T_{h-1}
  std::string detail;
};

/// Reconstructs the stopping times T_k from the realized point process
/// restricted to source i and levels [0, r(h-k)], then asserts pathwise
/// L_i(T_k) >= k+1 and X_i(t) >= h-k on [0, T_k).
inline EmptyingReport emptying_time_check(const ModelSpec& spec,
                                          const Trajectory& traj, int site,
                                          int h) {
  if (traj.engine != Engine::Construction1)
    throw InvalidArgument("emptying_time_check needs a construction-1 trajectory");
  if (traj.start[site] < h)
    throw InvalidArgument("emptying_time_check needs x_i >= h");
  EmptyingReport rep;
  double prev = 0.0;
  for (int k = 0; k < h; ++k) {
    double level = spec.rate(h - k);
    double tk = -1.0;
    for (const Event& e : traj.events) {
      if (e.t <= prev) continue;
      if (e.source == site && e.dest != site && e.dest >= 0 && e.level <= level) {
        tk = e.t;
        break;
      }
    }
    if (tk < 0.0) break;  // path ended before the next departure marker
    rep.stopping_times.push_back(tk);
    prev = tk;
  }
  // pathwise assertions along the replayed trajectory
  Configuration x = traj.start;
  std::size_t next_k = 0;
  int losses = 0;
  for (const Event& e : traj.events) {
    while (next_k < rep.stopping_times.size() && e.t >= rep.stopping_times[next_k]) {
      // X_i(t) >= h - k for t in [0, T_k): check just before T_k
      if (x[site] < h - static_cast<int>(next_k) &&
          e.t > rep.stopping_times[next_k]) {
        // state already moved past T_k; the check below covers it
      }
      ++next_k;
    }
    if (e.applied) {
      if (e.source == site) ++losses;
      // before applying: X_i must be >= h - k while t < T_k
      std::size_t k_active = 0;
      while (k_active < rep.stopping_times.size() &&
             rep.stopping_times[k_active] <= e.t)
        ++k_active;
      if (k_active < rep.stopping_times.size() &&
          x[site] < h - static_cast<int>(k_active)) {
        rep.ok = false;
        rep.detail = "occupancy dropped below h-k before T_k";
      }
      --x[e.source];
      ++x[e.dest];
    }
  }
  // loss counts at each T_k
  for (std::size_t k = 0; k < rep.stopping_times.size(); ++k) {
    int l = 0;
    for (const Event& e : traj.events)
      if (e.applied && e.source == site && e.t <= rep.stopping_times[k]) ++l;
    if (l < static_cast<int>(k) + 1) {
      rep.ok = false;
      rep.detail = "loss counter below k+1 at T_k";
    }
  }
  return rep;
}

}  // namespace zrp

#endif
