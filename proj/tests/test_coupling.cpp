#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "zrp/coupling.hpp"
#include "zrp/exact.hpp"

using namespace zrp;

TEST_CASE("tag delta helpers") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(1.0), 3, 4);
  REQUIRE(tag_delta(spec, 0) == 1.0);
  REQUIRE(tag_delta(spec, 4) == 1.0);  // r(5) - r(4), power rate
  REQUIRE(tag_delta_cap(spec) == 1.0);
  ModelSpec tab = ModelSpec::make(RateFunction::table({1.0, 1.5, 1.75}), 3, 3);
  // Delta(3) needs r(4); table falls back to Delta(2) = 0.25
  REQUIRE(tag_delta(tab, 3) == Catch::Approx(0.25));
  REQUIRE(tag_delta_cap(tab) == 1.0);  // Delta(0) = r(1)
}

TEST_CASE("coalescence is immediate for equal tags and absorbing") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(0.5), 3, 3);
  CoupledTrajectory same = simulate_tagged_pair(spec, all_at_site(3, 3), 1, 1, 2.0, 5);
  REQUIRE(same.tau == 0.0);
  REQUIRE(same.coalesced);
  CoupledTrajectory traj = simulate_tagged_pair(spec, all_at_site(3, 3), 0, 1, 50.0, 5);
  if (traj.coalesced) {
    // after tau the tags never separate
    for (const ThetaPoint& p : traj.theta_stream)
      if (p.t >= traj.tau) REQUIRE(traj.i_at(p.t) == traj.j_at(p.t));
  }
}

TEST_CASE("tagged marginal: X + delta_I has the (m+1)-particle law") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(1.0), 3, 2);
  Configuration x{{1, 1, 0}};
  const int tag = 0;
  ModelSpec bigger = ModelSpec::make(RateFunction::power(1.0), 3, 3);
  ExactModel model(bigger, Geometry::mean_field());
  Configuration augmented_start = x;
  ++augmented_start[tag];
  Eigen::VectorXd exact = model.distribution_at(augmented_start, 1.0);
  const long paths = 20000;
  Eigen::VectorXd emp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.states()));
  CouplingOptions opt;
  opt.record = false;
  for (long p = 0; p < paths; ++p) {
    CoupledTrajectory traj = simulate_tagged_pair(
        spec, x, tag, tag, 1.0, 67, path_stream(static_cast<std::uint64_t>(p)), opt);
    Configuration aug = traj.final_x;
    ++aug[traj.i_at(1.0)];
    emp(static_cast<Eigen::Index>(model.index().rank(aug))) += 1.0;
  }
  emp /= static_cast<double>(paths);
  double threshold = 2.5 * std::sqrt(static_cast<double>(model.states()) / paths);
  REQUIRE(tv_distance(emp, exact) < threshold);
}

TEST_CASE("coupling inequality against the exact TV") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(1.0), 3, 2);
  ModelSpec bigger = ModelSpec::make(RateFunction::power(1.0), 3, 3);
  ExactModel model(bigger, Geometry::mean_field());
  Configuration x{{1, 1, 0}};
  const int i = 0, j = 2;
  CoalescenceStats stats =
      coalescence_statistics(spec, x, i, j, 20000, 0.0, 71, 10.0);
  Configuration xi = x, xj = x;
  ++xi[i];
  ++xj[j];
  for (double t : {0.5, 1.0, 2.0}) {
    double exact_tv =
        tv_distance(model.distribution_at(xi, t), model.distribution_at(xj, t));
    REQUIRE(stats.tail_upper(t) >= exact_tv);
  }
}

TEST_CASE("constrained process with a non-binding Good set is identical") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(0.5), 3, 4);
  GoodSet everything{0.3, 1e9};
  Configuration x = all_at_site(3, 4);
  CoupledTrajectory a = simulate_tagged_pair(spec, x, 0, 1, 20.0, 13);
  CoupledTrajectory b = simulate_constrained(spec, everything, x, 0, 1, 20.0, 13);
  REQUIRE(b.suppressed.empty());
  REQUIRE(a.base.events.size() == b.base.events.size());
  for (std::size_t k = 0; k < a.base.events.size(); ++k) {
    REQUIRE(a.base.events[k].t == b.base.events[k].t);
    REQUIRE(a.base.events[k].applied == b.base.events[k].applied);
  }
  REQUIRE(a.theta_stream.size() == b.theta_stream.size());
  REQUIRE(a.tau == b.tau);
  REQUIRE(a.final_x == b.final_x);
}

TEST_CASE("pathwise prefix property and Good confinement") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(0.5), 3, 6);
  GoodSet good{0.5, 2.0};  // {phi^{1/2} <= 6}: binding for piles
  Configuration x{{2, 2, 2}};
  REQUIRE(good.contains(x));
  bool found_suppression = false;
  for (std::uint64_t seed = 1; seed <= 40 && !found_suppression; ++seed) {
    CoupledTrajectory con = simulate_constrained(spec, good, x, 0, 1, 30.0, seed);
    // confinement: replay the constrained background, always good
    Configuration y = x;
    REQUIRE(good.contains(y));
    for (const Event& e : con.base.events) {
      if (!e.applied) continue;
      y = y.moved(e.source, e.dest);
      REQUIRE(good.contains(y));
    }
    if (con.suppressed.empty()) continue;
    found_suppression = true;
    double first = con.suppressed.front();
    CoupledTrajectory unc = simulate_tagged_pair(spec, x, 0, 1, 30.0, seed);
    // strictly before the first suppressed event the paths agree
    std::size_t k = 0;
    for (; k < con.base.events.size() && con.base.events[k].t < first; ++k) {
      REQUIRE(unc.base.events[k].t == con.base.events[k].t);
      REQUIRE(unc.base.events[k].source == con.base.events[k].source);
      REQUIRE(unc.base.events[k].dest == con.base.events[k].dest);
      REQUIRE(unc.base.events[k].applied == con.base.events[k].applied);
    }
    // at the suppression time the unconstrained path applies the move
    REQUIRE(unc.base.events[k].applied);
    REQUIRE_FALSE(con.base.events[k].applied);
  }
  REQUIRE(found_suppression);
  REQUIRE_THROWS_AS(
      simulate_constrained(spec, good, all_at_site(3, 6), 0, 1, 1.0, 1),
      InvalidArgument);  // start outside Good
}

TEST_CASE("T_k schedule") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(1.0), 3, 2);
  SECTION("tags on empty sites give T_1 = 1") {
    Configuration x{{2, 0, 0}};
    CoupledTrajectory traj = simulate_tagged_pair(spec, x, 1, 2, 10.0, 3);
    std::vector<double> ts = tk_schedule(traj, 2.0);
    REQUIRE_FALSE(ts.empty());
    REQUIRE(ts[0] == 1.0);  // c2 * 0 + 1, deterministic
  }
  SECTION("schedule is increasing and truncated by the horizon") {
    CoupledTrajectory traj =
        simulate_tagged_pair(spec, Configuration{{1, 1, 0}}, 0, 1, 6.0, 9);
    std::vector<double> ts = tk_schedule(traj, 1.5);
    for (std::size_t k = 1; k < ts.size(); ++k) REQUIRE(ts[k] > ts[k - 1] + 1.0 - 1e-12);
    for (double t : ts) REQUIRE(t <= 6.0);
    REQUIRE_THROWS_AS(tk_schedule(traj, -1.0), InvalidArgument);
  }
  SECTION("geometric decay of P(tau >= T_k)") {
    const long paths = 2000;
    std::vector<long> alive(4, 0);
    for (long p = 0; p < paths; ++p) {
      CoupledTrajectory traj = simulate_tagged_pair(
          spec, Configuration{{1, 1, 0}}, 0, 2, 40.0, 77,
          path_stream(static_cast<std::uint64_t>(p)));
      std::vector<double> ts = tk_schedule(traj, 1.0);
      double tau = traj.coalesced ? traj.tau : 1e300;
      for (std::size_t k = 0; k < alive.size() && k < ts.size(); ++k)
        if (tau >= ts[k]) ++alive[k];
    }
    for (std::size_t k = 1; k < alive.size(); ++k)
      REQUIRE(alive[k] <= alive[k - 1]);  // nested events
    REQUIRE(alive[0] > 0);
    REQUIRE(alive[3] < alive[0] / 2);  // decay across four rounds
  }
}

TEST_CASE("coalescence statistics") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(1.0), 3, 2);
  SECTION("i = j gives tau == 0 and moment 1") {
    CoalescenceStats stats =
        coalescence_statistics(spec, Configuration{{1, 1, 0}}, 2, 2, 100, 0.5, 3);
    REQUIRE(stats.censored == 0);
    REQUIRE(stats.exp_moment.mean == Catch::Approx(1.0));
    REQUIRE(stats.tail(0.0) == 0.0);
  }
  SECTION("gamma at half the exact gap stays finite and below the gap") {
    ExactModel model(spec, Geometry::mean_field());
    double gap = model.spectral_gap();
    double gamma = gap / 2.0;
    CoalescenceStats stats = coalescence_statistics(
        spec, Configuration{{1, 1, 0}}, 0, 1, 4000, gamma, 7);
    REQUIRE(stats.censored == 0);
    REQUIRE(std::isfinite(stats.exp_moment.mean));
    REQUIRE(gamma < gap);
  }
  SECTION("doubling the rates halves the median coalescence time") {
    auto median_tau = [](const ModelSpec& s, std::uint64_t seed) {
      CoalescenceStats stats = coalescence_statistics(
          s, Configuration{{1, 1, 0}}, 0, 1, 4000, 0.0, seed);
      std::vector<double> taus = stats.taus;
      std::sort(taus.begin(), taus.end());
      return taus[taus.size() / 2];
    };
    ModelSpec fast = ModelSpec::make(RateFunction::table({2.0, 4.0}), 3, 2);
    double m1 = median_tau(spec, 11);
    double m2 = median_tau(fast, 11);
    REQUIRE(m2 == Catch::Approx(m1 / 2.0).epsilon(0.25));
  }
  SECTION("constant rate flags the degenerate coupling") {
    // Delta(k) = 0 for every k >= 1: tags move only while they sit alone.
    ModelSpec flat = ModelSpec::make(RateFunction::table({1.0, 1.0}), 3, 2);
    CoupledTrajectory traj =
        simulate_tagged_pair(flat, Configuration{{1, 1, 0}}, 0, 1, 5.0, 1);
    REQUIRE(traj.degenerate_delta);
    int cur = 0;  // tag I starts at site 0
    for (const ThetaPoint& p : traj.theta_stream) {
      // a tag with a cooccupant never jumps under a constant rate
      if (p.i_applied) {
        REQUIRE(traj.base.state_at(p.t)[cur] == 0);
        cur = p.dest;
      }
    }
    CoalescenceStats stats =
        coalescence_statistics(flat, Configuration{{1, 1, 0}}, 0, 1, 200, 0.0, 1);
    REQUIRE(stats.degenerate_delta);
  }
}

TEST_CASE("greedy adjacent path") {
  Configuration x{{4, 0, 0}}, y{{0, 4, 0}};
  auto steps = greedy_adjacent_path(x, y);
  REQUIRE(steps.size() == 4);
  Configuration cur = x;
  for (const PathStep& s : steps) {
    REQUIRE(s.from == 0);
    REQUIRE(s.to == 1);
    Configuration shared = cur;
    --shared[s.from];
    REQUIRE(s.shared == shared);
    cur = cur.moved(s.from, s.to);
    REQUIRE(cur.max_occupancy() <= 4);
  }
  REQUIRE(cur == y);
  REQUIRE(greedy_adjacent_path(x, x).empty());
  REQUIRE_THROWS_AS(greedy_adjacent_path(x, Configuration{{4, 0}}), InvalidArgument);
}

TEST_CASE("path-coupling TV bound") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(1.0), 3, 4);
  ExactModel model(spec, Geometry::mean_field());
  SECTION("x = y gives bound 0") {
    PathCouplingBound b = path_coupling_tv_bound(
        spec, all_at_site(3, 4), all_at_site(3, 4), 1.0, 100, 1);
    REQUIRE(b.bound == 0.0);
    REQUIRE(b.path_length == 0);
  }
  SECTION("adjacent pair") {
    Configuration x{{2, 1, 1}}, y{{1, 2, 1}};
    PathCouplingBound b = path_coupling_tv_bound(spec, x, y, 1.0, 4000, 3);
    REQUIRE(b.path_length == 1);
    double exact =
        tv_distance(model.distribution_at(x, 1.0), model.distribution_at(y, 1.0));
    REQUIRE(b.bound >= exact);
  }
  SECTION("opposite piles at two times") {
    Configuration x{{4, 0, 0}}, y{{0, 4, 0}};
    for (double t : {0.5, 1.0}) {
      PathCouplingBound b = path_coupling_tv_bound(spec, x, y, t, 4000, 5);
      REQUIRE(b.path_length == 4);
      double exact =
          tv_distance(model.distribution_at(x, t), model.distribution_at(y, t));
      REQUIRE(b.bound >= exact);
    }
  }
}

TEST_CASE("cooccupant drift certification and moment bound") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(1.0), 3, 6);
  GoodSet good{0.5, 2.0};
  CooccupantDrift drift = certify_cooccupant_drift(spec, good, 0.25);
  REQUIRE(drift.states_scanned > 0);
  REQUIRE(drift.b2 >= 0.0);
  REQUIRE(drift.c2 == Catch::Approx(0.5 / 0.25));
  REQUIRE(drift.big_k >= 2.0);
  // certification really is an upper bound on L* phi* over Good x [n]
  StateIndex idx(3, 6);
  for (std::uint64_t s = 0; s < idx.size(); ++s) {
    Configuration x = idx.unrank(s);
    if (!good.contains(x)) continue;
    for (int i = 0; i < 3; ++i) {
      double lhs = constrained_generator_phi_star(spec, good, x, i);
      REQUIRE(lhs <= -drift.a2 * std::exp(good.theta2 * x[i]) + drift.b2 + 1e-9);
    }
  }
  // Monte Carlo cooccupant moment at t >= c2 (x_i v x_j)
  Configuration x{{2, 2, 2}};
  REQUIRE(good.contains(x));
  double t = drift.c2 * 2.0;
  const long paths = 2000;
  std::vector<double> vals;
  CouplingOptions opt;
  opt.record = false;
  for (long p = 0; p < paths; ++p) {
    CoupledTrajectory traj = simulate_constrained(
        spec, good, x, 0, 1, t, 101, path_stream(static_cast<std::uint64_t>(p)), opt);
    int hi = traj.final_x[traj.i_at(t)];
    int hj = traj.final_x[traj.j_at(t)];
    vals.push_back(std::exp(good.theta2 * std::max(hi, hj)));
  }
  MeanEstimate est = mean_estimate(vals);
  REQUIRE(est.mean - 3.0 * est.se <= drift.big_k);
  CooccupantDrift chosen = choose_cooccupant_drift(spec, good);
  REQUIRE(chosen.a2 > 0.0);
  REQUIRE_THROWS_AS(certify_cooccupant_drift(spec, good, 0.0), InvalidArgument);
}
