#ifndef ZRP_EXPERIMENTS_HPP
#define ZRP_EXPERIMENTS_HPP

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "zrp/coupling.hpp"
#include "zrp/exact.hpp"
#include "zrp/report.hpp"
#include "zrp/simulate.hpp"

namespace zrp {

inline Engine engine_from_name(const std::string& name) {
  if (name == "c1") return Engine::Construction1;
  if (name == "c2") return Engine::Construction2;
  if (name == "gillespie") return Engine::Gillespie;
  throw InvalidArgument("unknown engine: " + name);
}

namespace detail {

inline ModelSpec config_spec(const ExperimentConfig& c, int m_override = -1) {
  int m = m_override > 0 ? m_override : c.m;
  if (c.n < 2 || m < 1)
    throw InvalidArgument("experiment needs n >= 2 and m >= 1");
  return ModelSpec::make(c.rate, c.n, m, c.rho);
}

inline std::vector<double> default_time_grid(double t_max, int points) {
  std::vector<double> ts;
  ts.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    ts.push_back(t_max * i / (points - 1));
  return ts;
}

inline Configuration config_start(const ExperimentConfig& c, const ModelSpec& spec,
                                  const char* key = "x") {
  if (c.raw.contains(key)) {
    Configuration x{c.raw.at(key).get<std::vector<int>>()};
    if (x.site_count() != spec.n || x.particle_count() != spec.m)
      throw InvalidArgument("configured start state does not match (n, m)");
    return x;
  }
  return all_at_site(spec.n, spec.m);
}

}  // namespace detail

inline nlohmann::json run_mix_curve(const ExperimentConfig& c) {
  ModelSpec spec = detail::config_spec(c);
  ExactModel model(spec, Geometry::mean_field());
  Configuration x = detail::config_start(c, spec);
  std::vector<double> ts = c.t_grid;
  if (ts.empty())
    ts = detail::default_time_grid(3.0 * (spec.rate.big_r(spec.m) + 1.0), 49);
  MixingCurve curve = model.mixing_curve(x, ts, c.epsilon);
  CsvWriter csv(c.out / "mix_curve.csv", {"t", "tv"});
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    csv.row(curve.times[i], curve.tv_values[i]);
  if (c.raw.value("export_matrices", false)) {
    CsvWriter pi(c.out / "pi.csv", {"rank", "pi"});
    for (std::uint64_t s = 0; s < model.states(); ++s)
      pi.row(s, model.stationary()(static_cast<Eigen::Index>(s)));
    std::ofstream q(c.out / "q_triplets.txt");
    const auto& gen = model.generator();
    for (Eigen::Index r = 0; r < gen.rows(); ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(gen, r);
           it; ++it)
        q << r << ' ' << it.col() << ' ' << format_g17(it.value()) << '\n';
  }
  return {{"t_mix", curve.t_mix},
          {"epsilon", c.epsilon},
          {"big_r", spec.rate.big_r(spec.m)},
          {"states", model.states()}};
}

inline nlohmann::json run_cutoff_scan(const ExperimentConfig& c) {
  std::vector<int> ms = c.m_grid.empty() ? std::vector<int>{8, 16, 24, 32}
                                         : c.m_grid;
  CsvWriter csv(c.out / "cutoff_scan.csv",
                {"m", "big_r", "t_mix", "ratio", "t_tv09", "t_tv01", "width",
                 "width_over_big_r"});
  std::vector<double> ratios, widths;
  for (int m : ms) {
    ModelSpec spec = detail::config_spec(c, m);
    ExactModel model(spec, Geometry::mean_field());
    Configuration x = all_at_site(spec.n, m);
    double big_r = spec.rate.big_r(m);
    double t_mix = model.mixing_time(x, c.epsilon);
    double t09 = model.mixing_time(x, 0.9);
    double t01 = model.mixing_time(x, 0.1);
    double w = t01 - t09;
    ratios.push_back(t_mix / big_r);
    widths.push_back(w / big_r);
    csv.row(m, big_r, t_mix, t_mix / big_r, t09, t01, w, w / big_r);
  }
  return {{"m_grid", ms}, {"ratios", ratios}, {"widths_over_big_r", widths}};
}

inline nlohmann::json run_gap_table(const ExperimentConfig& c) {
  std::vector<std::pair<int, int>> grid = {{3, 1}, {4, 1}, {5, 1}, {3, 2}};
  if (c.raw.contains("pd_grid")) {
    grid.clear();
    for (const auto& pd : c.raw.at("pd_grid"))
      grid.emplace_back(pd.at(0).get<int>(), pd.at(1).get<int>());
  }
  CsvWriter csv(c.out / "gap_table.csv",
                {"p", "d", "closed_form", "numeric", "abs_err"});
  double max_err = 0.0;
  for (auto [p, d] : grid) {
    double closed = torus_gap_closed_form(p, d);
    double numeric = walk_spectral_gap(torus_matrix(p, d));
    double err = std::abs(closed - numeric);
    max_err = std::max(max_err, err);
    csv.row(p, d, closed, numeric, err);
  }
  return {{"max_abs_err", max_err}};
}

inline nlohmann::json run_coalescence(const ExperimentConfig& c) {
  ModelSpec spec = detail::config_spec(c);
  Configuration x = detail::config_start(c, spec);
  int i = c.raw.value("i", 0);
  int j = c.raw.value("j", 1);
  double gamma;
  double lambda_star = -1.0;
  StateIndex probe(spec.n, spec.m);
  if (probe.size() <= 6000) {
    ExactModel model(spec, Geometry::mean_field());
    lambda_star = model.spectral_gap();
  }
  gamma = c.raw.value("gamma", lambda_star > 0.0 ? lambda_star / 2.0 : 0.1);
  CoalescenceStats stats =
      coalescence_statistics(spec, x, i, j, c.paths, gamma, c.seed);
  const int bins = 40;
  CsvWriter csv(c.out / "coalescence.csv", {"bin_lo", "bin_hi", "count"});
  std::vector<long> hist(bins, 0);
  for (double tau : stats.taus) {
    int b = std::min(bins - 1,
                     static_cast<int>(tau / stats.time_cap * bins));
    ++hist[static_cast<std::size_t>(b)];
  }
  for (int b = 0; b < bins; ++b)
    csv.row(stats.time_cap * b / bins, stats.time_cap * (b + 1) / bins,
            hist[static_cast<std::size_t>(b)]);
  nlohmann::json summary = {
      {"gamma", gamma},
      {"censored", stats.censored},
      {"paths", c.paths},
      {"time_cap", stats.time_cap},
      {"exp_moment_mean", stats.exp_moment.mean},
      {"exp_moment_se", stats.exp_moment.se},
      {"degenerate_delta", stats.degenerate_delta}};
  if (lambda_star > 0.0) {
    summary["lambda_star"] = lambda_star;
    summary["gamma_below_gap"] = gamma < lambda_star;
  }
  return summary;
}

inline nlohmann::json run_path_bound(const ExperimentConfig& c) {
  ModelSpec spec = detail::config_spec(c);
  std::vector<std::pair<Configuration, Configuration>> pairs;
  if (c.raw.contains("pairs")) {
    for (const auto& pr : c.raw.at("pairs"))
      pairs.emplace_back(Configuration{pr.at(0).get<std::vector<int>>()},
                         Configuration{pr.at(1).get<std::vector<int>>()});
  } else {
    pairs.emplace_back(all_at_site(spec.n, spec.m, 0),
                       all_at_site(spec.n, spec.m, 1));
  }
  std::vector<double> ts = c.t_grid.empty() ? std::vector<double>{1.0} : c.t_grid;
  StateIndex probe(spec.n, spec.m);
  std::optional<ExactModel> model;
  if (probe.size() <= 20000) model.emplace(spec, Geometry::mean_field());
  CsvWriter csv(c.out / "path_bound.csv",
                {"pair", "t", "path_length", "bound", "exact_tv", "dominates"});
  bool all_dominate = true;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi)
    for (double t : ts) {
      PathCouplingBound b = path_coupling_tv_bound(spec, pairs[pi].first,
                                                   pairs[pi].second, t,
                                                   c.paths, c.seed);
      double exact = -1.0;
      bool dom = true;
      if (model) {
        exact = tv_distance(model->distribution_at(pairs[pi].first, t),
                            model->distribution_at(pairs[pi].second, t));
        dom = b.bound >= exact - 1e-3;
        all_dominate = all_dominate && dom;
      }
      csv.row(pi, t, b.path_length, b.bound, exact, dom);
    }
  return {{"pairs", pairs.size()}, {"all_dominate", all_dominate}};
}

inline nlohmann::json run_dissolution(const ExperimentConfig& c) {
  ModelSpec spec = detail::config_spec(c);
  Configuration x = detail::config_start(c, spec);
  double a = c.raw.value("a", std::ceil(spec.m / 2.0));
  double big_r = spec.rate.big_r(spec.m);
  std::vector<double> ts = c.t_grid.empty()
                               ? std::vector<double>{big_r / 2.0, big_r, 2.0 * big_r}
                               : c.t_grid;
  Engine engine = engine_from_name(c.engine);
  CsvWriter csv(c.out / "dissolution.csv",
                {"t", "a", "estimate", "lower", "upper"});
  std::vector<double> estimates;
  for (double t : ts) {
    EventQuery q;
    q.kind = PathEvent::SupNormAt;
    q.a = a;
    WilsonInterval w = event_probability(spec, engine, x, q, t, c.paths, c.seed);
    estimates.push_back(w.estimate);
    csv.row(t, a, w.estimate, w.lower, w.upper);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < estimates.size(); ++i)
    decreasing = decreasing && estimates[i] <= estimates[i - 1] + 1e-12;
  return {{"a", a}, {"estimates", estimates}, {"decreasing", decreasing}};
}

inline nlohmann::json run_emptying(const ExperimentConfig& c) {
  ModelSpec spec = detail::config_spec(c);
  Configuration x = all_at_site(spec.n, spec.m);
  double horizon = c.raw.value("horizon",
                               20.0 * (spec.rate.big_r(spec.m) + 1.0));
  long violations = 0, censored = 0;
  std::vector<double> empty_times;
  for (long p = 0; p < c.paths; ++p) {
    std::uint64_t path_seed = c.seed + static_cast<std::uint64_t>(p) * 0x9e3779b97f4a7c15ull;
    Trajectory traj = simulate(spec, Engine::Construction1, x, horizon, path_seed);
    EmptyingReport rep = emptying_time_check(spec, traj, 0, spec.m);
    if (!rep.ok) ++violations;
    // first time site 0 empties
    Configuration y = x;
    double t_empty = -1.0;
    for (const Event& e : traj.events) {
      if (!e.applied) continue;
      --y[e.source];
      ++y[e.dest];
      if (y[0] == 0) {
        t_empty = e.t;
        break;
      }
    }
    if (t_empty < 0.0)
      ++censored;
    else
      empty_times.push_back(t_empty);
  }
  MeanEstimate est = mean_estimate(empty_times);
  CsvWriter csv(c.out / "emptying.csv",
                {"paths", "horizon", "violations", "censored",
                 "mean_empty_time", "se", "big_r"});
  csv.row(c.paths, horizon, violations, censored, est.mean, est.se,
          spec.rate.big_r(spec.m));
  return {{"violations", violations},
          {"censored", censored},
          {"mean_empty_time", est.mean},
          {"se", est.se},
          {"big_r", spec.rate.big_r(spec.m)}};
}

inline Eigen::MatrixXd geometry_matrix_from_config(const ExperimentConfig& c) {
  if (c.raw.contains("geometry")) {
    const auto& g = c.raw.at("geometry");
    std::string kind = g.at("kind").get<std::string>();
    if (kind == "torus")
      return torus_matrix(g.at("p").get<int>(), g.at("d").get<int>());
    if (kind == "cycle2") {
      Eigen::MatrixXd p(2, 2);
      p << 0, 1, 1, 0;
      return p;
    }
    throw InvalidArgument("unknown geometry kind: " + kind);
  }
  if (c.n == 2) {
    Eigen::MatrixXd p(2, 2);
    p << 0, 1, 1, 0;
    return p;
  }
  return torus_matrix(c.n, 1);
}

inline nlohmann::json run_sandwich(const ExperimentConfig& c) {
  ModelSpec spec = detail::config_spec(c);
  Eigen::MatrixXd p = geometry_matrix_from_config(c);
  if (p.rows() != spec.n)
    throw InvalidArgument("geometry size does not match n");
  SandwichResult r = hermon_salez_sandwich(spec, p);
  CsvWriter csv(c.out / "sandwich.csv",
                {"n", "m", "lower", "middle", "upper", "ordered"});
  csv.row(spec.n, spec.m, r.lower, r.middle, r.upper, r.ordered);
  return {{"lower", r.lower},
          {"middle", r.middle},
          {"upper", r.upper},
          {"ordered", r.ordered}};
}

inline nlohmann::json run_torus(const ExperimentConfig& c) {
  int p = c.raw.value("p", c.n);
  int d = c.raw.value("d", 1);
  double sites = std::pow(static_cast<double>(p), d);
  if (c.n != static_cast<int>(std::lround(sites)))
    throw InvalidArgument("torus experiment needs n = p^d");
  ModelSpec spec = detail::config_spec(c);
  Eigen::MatrixXd pm = torus_matrix(p, d);
  ExactModel on_torus(spec, Geometry::matrix(pm));
  ExactModel mean_field(spec, Geometry::mean_field());
  double walk_closed = torus_gap_closed_form(p, d);
  double walk_numeric = walk_spectral_gap(pm);
  double zrp_gap = on_torus.spectral_gap();
  double mf_gap = mean_field.spectral_gap();
  CsvWriter csv(c.out / "torus.csv",
                {"p", "d", "m", "walk_gap_closed", "walk_gap_numeric",
                 "zrp_gap", "mf_gap", "ratio"});
  csv.row(p, d, spec.m, walk_closed, walk_numeric, zrp_gap, mf_gap,
          zrp_gap / walk_numeric);
  return {{"walk_gap", walk_numeric},
          {"zrp_gap", zrp_gap},
          {"mf_gap", mf_gap},
          {"ratio", zrp_gap / walk_numeric}};
}

inline nlohmann::json run_experiment(const ExperimentConfig& c) {
  std::filesystem::create_directories(c.out);
  nlohmann::json summary;
  if (c.experiment == "mix-curve") summary = run_mix_curve(c);
  else if (c.experiment == "cutoff-scan") summary = run_cutoff_scan(c);
  else if (c.experiment == "gap-table") summary = run_gap_table(c);
  else if (c.experiment == "coalescence") summary = run_coalescence(c);
  else if (c.experiment == "path-bound") summary = run_path_bound(c);
  else if (c.experiment == "dissolution") summary = run_dissolution(c);
  else if (c.experiment == "emptying") summary = run_emptying(c);
  else if (c.experiment == "sandwich") summary = run_sandwich(c);
  else if (c.experiment == "torus") summary = run_torus(c);
  else throw InvalidArgument("unknown experiment: " + c.experiment);
  write_manifest(c, summary);
  std::ofstream out(c.out / "summary.json");
  if (!out) throw Error("cannot write summary in " + c.out.string());
  out << summary.dump(2) << '\n';
  return summary;
}

}  // namespace zrp

#endif
