#pragma once

// The build's own gate: every pathwise identity and every dominance property
// of the library, evaluated on simulated null paths of the Gaussian
// exponential martingale, with the location of the worst case.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "peekstat/ay.hpp"
#include "peekstat/detail/parallel.hpp"
#include "peekstat/distribution.hpp"
#include "peekstat/dominance.hpp"
#include "peekstat/extrema.hpp"
#include "peekstat/harness.hpp"
#include "peekstat/potential.hpp"
#include "peekstat/random.hpp"
#include "peekstat/studies.hpp"

namespace peekstat {

struct InvariantResult {
  std::string name;
  bool passed = true;
  bool vacuous = false;
  double worst = 0.0;      // largest deviation observed (in the check's own units)
  double tolerance = 0.0;  // pass iff worst <= tolerance
  std::optional<std::uint64_t> path;
  std::optional<std::uint64_t> step;
  std::uint64_t seed = 0;  // path seed (pathwise checks) or study seed
  std::string note;
};

struct InvariantReport {
  std::vector<InvariantResult> results;

  bool all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
  }
  bool all_vacuous() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.vacuous; });
  }
  int exit_code() const { return all_passed() ? 0 : 1; }
  const InvariantResult* find(const std::string& name) const {
    for (const auto& r : results) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }
};

/// Replaceable pieces, so tests can inject faults and watch the suite catch
/// them.
struct InvariantHooks {
  std::function<ExtremaState(ExtremaState, double, double, double, double)> extrema_update =
      update_extrema;
};

namespace detail {

struct Worst {
  bool any = false;
  double value = -std::numeric_limits<double>::infinity();
  std::uint64_t path = 0;
  std::uint64_t step = 0;

  void offer(double v, std::uint64_t p, std::uint64_t t) {
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    if (!any || v > value) {
      any = true;
      value = v;
      path = p;
      step = t;
    }
  }
  void merge(const Worst& o) {
    if (o.any) offer(o.value, o.path, o.step);
  }
};

enum PathwiseCheck : std::size_t {
  kExtremaIdentity,
  kLogMaxBound,
  kCompensatorMonotone,
  kRunningMinNonincreasing,
  kAYLowerBound,
  kAYRunningMaxExact,
  kAYDominatedByUpperProcess,
  kAYRecordConsistency,
  kAYDifferenceIdentity,
  kBachelierIncrement,
  kBachelierDrawdown,
  kBregmanNonnegative,
  kMaxPlusLowerIdentity,
  kMMRoundtrip,
  kPathwiseCount
};

struct PathwiseSpec {
  const char* name;
  double tolerance;
};

inline constexpr std::array<PathwiseSpec, kPathwiseCount> kPathwiseSpecs{{
    {"extrema_identity", 1e-10},
    {"log_max_bound", 1e-12},
    {"compensator_monotone", 0.0},
    {"running_min_nonincreasing", 0.0},
    {"ay_lower_bound", 0.0},
    {"ay_running_max_exact", 0.0},
    {"ay_dominated_by_upper_process", 0.0},
    {"ay_record_consistency", 0.0},
    {"ay_difference_identity", 1e-9},
    {"bachelier_increment", 1e-9},
    {"bachelier_drawdown", 1e-9},
    {"bregman_nonnegative", 1e-12},
    {"maxplus_lower_identity", 1e-9},
    {"mm_roundtrip", 1e-9},
}};

// End-of-path facts feeding the statistical checks.
struct PathFacts {
  double m_short = 1.0;  // M at a short fixed time
  double log_s = 0.0;
  double q = 0.0;
  double y = 0.0;
  double b = 0.0;
  double r_check = 1.0;  // R at the rho_F checkpoint
  bool resolved = false;
  std::uint64_t rho_f = 0;
  double r_at_tau_f = 1.0;
  std::vector<double> lookahead_path;  // only for the first few paths
};

inline InvariantResult threshold_result(std::string name, double worst, double tol,
                                        std::uint64_t seed, std::string note = {}) {
  InvariantResult r;
  r.name = std::move(name);
  r.worst = worst;
  r.tolerance = tol;
  r.passed = worst <= tol;
  r.seed = seed;
  r.note = std::move(note);
  return r;
}

}  // namespace detail

/// Runs every check on cfg.n_paths paths of cfg.horizon steps of the Gaussian
/// exponential martingale with the configured lambda, potential and mu.
inline InvariantReport run_invariant_suite(const ExperimentConfig& cfg,
                                           const InvariantHooks& hooks = {}) {
  cfg.validate(/*allow_zero_horizon=*/true);
  const Potential pot = cfg.make_potential();
  const DistributionModel mu = cfg.make_mu();
  InvariantReport rep;

  static const char* const kStatistical[] = {
      "martingale_mean_short_time", "ville_c0.5", "ville_c0.2", "ville_c0.1", "ville_c0.05",
      "q_supermartingale", "y_supermartingale", "b_martingale", "rho_f_in_expectation",
      "ultimate_max_vs_pareto1", "lookahead_dominance", "r_validity_at_tau_f",
      "ecdf_calibration", "self_dominance", "distribution_monotonicity", "ay_four_forms",
      "hl_variational_crosscheck", "tau_mu_calibration"};

  if (cfg.horizon == 0) {
    for (const auto& s : detail::kPathwiseSpecs) {
      InvariantResult r;
      r.name = s.name;
      r.vacuous = true;
      r.tolerance = s.tolerance;
      r.note = "zero horizon";
      rep.results.push_back(r);
    }
    for (const char* name : kStatistical) {
      InvariantResult r;
      r.name = name;
      r.vacuous = true;
      r.note = "zero horizon";
      rep.results.push_back(r);
    }
    InvariantResult r;
    r.name = "hl_maximal_inequality";
    r.vacuous = true;
    r.note = "zero horizon";
    rep.results.push_back(r);
    return rep;
  }

  const std::uint64_t n = cfg.n_paths;
  const std::uint64_t T = cfg.horizon;
  const std::uint64_t t_short = std::min<std::uint64_t>(T, 3);
  const std::uint64_t t_rho = std::clamp<std::uint64_t>(T / 10, 1, 10);
  const std::uint64_t t_look = std::min<std::uint64_t>(T / 2, 5);
  const std::uint64_t n_look = std::min<std::uint64_t>(n, 2000);
  const double G1 = pot.G(1.0);

  std::vector<std::array<detail::Worst, detail::kPathwiseCount>> worst(n);
  std::vector<detail::PathFacts> facts(n);

  detail::parallel_for(n, cfg.threads, [&](std::uint64_t i) {
    const std::uint64_t seed = path_seed(cfg.master_seed, i);
    PathRng rng(seed);
    PathRng noise(mix64(seed ^ 0x6e6f697365ULL));
    auto& w = worst[i];
    auto& f = facts[i];

    PathState path = start_path(seed);
    ExtremaState ex;
    AYState ay = ay_start(pot);
    FinalMaxTracker tracker;
    tracker.observe(0, 0.0, 0.0);
    double m = 1.0;
    double s = 1.0;
    double max_a = G1 + std::abs(noise.normal());
    double max_b = ay.b;
    std::vector<double> b_path{ay.b};
    std::vector<double> m_path{1.0};
    b_path.reserve(T + 1);
    m_path.reserve(T + 1);
    if (i < n_look) f.lookahead_path.push_back(1.0);

    for (std::uint64_t t = 1; t <= T; ++t) {
      path = step_gaussian_exp(path, cfg.lambda, rng.normal());
      const double m_new = path.m();
      const double s_new = path.s();
      tracker.observe(t, path.log_m, path.log_s);

      const double l_prev = ex.L();
      const double r_prev = ex.r;
      ex = hooks.extrema_update(ex, m, s, m_new, s_new);
      w[detail::kExtremaIdentity].offer(std::abs(extrema_identity_residual(ex, m_new, s_new)), i, t);
      w[detail::kLogMaxBound].offer(ex.L() - std::log(s_new), i, t);
      const double dl = ex.L() - l_prev;
      w[detail::kCompensatorMonotone].offer(s_new == s ? std::abs(dl) : -dl, i, t);
      w[detail::kRunningMinNonincreasing].offer(
          std::max({ex.r - r_prev, ex.azema_bound - 1.0, -ex.azema_bound}), i, t);

      const double y_prev = ay.y;
      const double b_prev = ay.b;
      ay = ay_step(ay, pot, m_new, s_new, m, s);
      const double g_s = pot.g(s_new);
      const double G_s = pot.G(s_new);
      w[detail::kAYLowerBound].offer(g_s - ay.y, i, t);
      w[detail::kAYRunningMaxExact].offer(std::abs(ay.y_max - G_s), i, t);
      max_a = std::max(max_a, pot.G(m_new) + std::abs(noise.normal()));
      w[detail::kAYDominatedByUpperProcess].offer(ay.y_max - max_a, i, t);
      if (m_new == s_new) w[detail::kAYRecordConsistency].offer(std::abs(ay.y - pot.G(m_new)), i, t);

      const double slope_prev = pot.Gprime(s);
      const double d = bregman_neg_G(pot, s_new, s);
      const double scale_y = 1.0 + std::abs(ay.y);
      w[detail::kAYDifferenceIdentity].offer(
          std::abs((ay.y - y_prev) - ((m_new - m) * slope_prev - d)) / scale_y, i, t);
      const double scale_b = 1.0 + std::abs(ay.b);
      w[detail::kBachelierIncrement].offer(std::abs((ay.b - b_prev) - (m_new - m) * slope_prev) / scale_b,
                                           i, t);
      max_b = std::max(max_b, ay.b);
      w[detail::kBachelierDrawdown].offer(
          std::abs((max_b - ay.b) - (s_new - m_new) * pot.Gprime(s_new)) / scale_b, i, t);
      w[detail::kBregmanNonnegative].offer(-d / (1.0 + std::abs(G_s)), i, t);
      // G'(M) overflows for subnormal M, where the identity is not evaluable.
      if (m_new >= std::numeric_limits<double>::min()) {
        const double gm = pot.g(m_new);
        w[detail::kMaxPlusLowerIdentity].offer(std::abs(maxplus_lower(pot, m_new) - gm) / (1.0 + std::abs(gm)),
                                               i, t);
      }

      b_path.push_back(ay.b);
      m_path.push_back(m_new);
      if (i < n_look && t <= 2 * t_look + 1000) f.lookahead_path.push_back(m_new);
      if (t == t_short) f.m_short = m_new;
      if (t == t_rho) f.r_check = ex.r;
      m = m_new;
      s = s_new;
    }

    const MMPath back = mm_decompose(b_path, pot);
    double err = 0.0;
    std::uint64_t at = 0;
    for (std::size_t t = 0; t < m_path.size(); ++t) {
      const double e = std::abs(back.m[t] - m_path[t]);
      if (e > err) {
        err = e;
        at = t;
      }
    }
    w[detail::kMMRoundtrip].offer(err, i, at);

    f.log_s = path.log_s;
    f.q = ex.Q();
    f.y = ay.y;
    f.b = ay.b;
    f.resolved = tracker.resolved(cfg.decay_threshold);
    f.rho_f = tracker.rho_f();
    f.r_at_tau_f = tracker.r_at_tau_f();
  });

  for (std::size_t c = 0; c < detail::kPathwiseCount; ++c) {
    detail::Worst agg;
    for (std::uint64_t i = 0; i < n; ++i) agg.merge(worst[i][c]);
    InvariantResult r;
    r.name = detail::kPathwiseSpecs[c].name;
    r.tolerance = detail::kPathwiseSpecs[c].tolerance;
    if (!agg.any) {
      r.vacuous = true;
      r.note = "no applicable steps";
    } else {
      r.worst = agg.value;
      r.passed = agg.value <= r.tolerance;
      r.path = agg.path;
      r.step = agg.step;
      r.seed = path_seed(cfg.master_seed, agg.path);
    }
    rep.results.push_back(r);
  }

  const auto collect = [&](auto&& field) {
    std::vector<double> v;
    v.reserve(n);
    for (const auto& f : facts) v.push_back(field(f));
    return v;
  };
  const std::uint64_t seed = cfg.master_seed;

  {
    const auto est = mean_estimate(collect([](const auto& f) { return f.m_short; }));
    rep.results.push_back(detail::threshold_result("martingale_mean_short_time", std::abs(est.mean - 1.0),
                                                   3.0 * est.stderr_, seed,
                                                   "t = " + std::to_string(t_short)));
  }
  const auto log_s = collect([](const auto& f) { return f.log_s; });
  for (const double c : {0.5, 0.2, 0.1, 0.05}) {
    const auto freq = ville_frequency(log_s, c);
    const double se = std::sqrt(c * (1.0 - c) / static_cast<double>(n));
    char name[32];
    std::snprintf(name, sizeof name, "ville_c%g", c);
    rep.results.push_back(detail::threshold_result(name, freq.rate() - c, 3.0 * se, seed));
  }
  {
    const auto est = mean_estimate(collect([](const auto& f) { return f.q; }));
    rep.results.push_back(detail::threshold_result("q_supermartingale", est.mean, 3.0 * est.stderr_, seed));
  }
  {
    const auto est = mean_estimate(collect([](const auto& f) { return f.y; }));
    rep.results.push_back(
        detail::threshold_result("y_supermartingale", est.mean - G1, 3.0 * est.stderr_, seed));
  }
  {
    const auto est = mean_estimate(collect([](const auto& f) { return f.b; }));
    rep.results.push_back(
        detail::threshold_result("b_martingale", std::abs(est.mean - G1), 3.0 * est.stderr_, seed));
  }
  std::size_t n_unresolved = 0;
  {
    std::vector<double> diff;
    for (const auto& f : facts) {
      if (!f.resolved) {
        ++n_unresolved;
        continue;
      }
      diff.push_back((f.rho_f > t_rho ? 1.0 : 0.0) - f.r_check);
    }
    if (diff.empty()) {
      InvariantResult r;
      r.name = "rho_f_in_expectation";
      r.vacuous = true;
      r.note = "no resolved paths";
      rep.results.push_back(r);
    } else {
      const auto est = mean_estimate(diff);
      rep.results.push_back(detail::threshold_result(
          "rho_f_in_expectation", est.mean, 3.0 * est.stderr_, seed,
          "t = " + std::to_string(t_rho) + ", unresolved paths excluded: " + std::to_string(n_unresolved)));
    }
  }
  {
    std::vector<double> s_final;
    for (double v : log_s) s_final.push_back(std::exp(v));
    const auto d = check_dominance_against(
        s_final, [](double x) { return x <= 1.0 ? 1.0 : 1.0 / x; }, Side::ReferenceDominates, cfg.delta);
    rep.results.push_back(detail::threshold_result("ultimate_max_vs_pareto1", d.max_violation, d.slack, seed));

    const auto self = check_dominance(s_final, s_final, cfg.delta);
    rep.results.push_back(detail::threshold_result("self_dominance", self.max_violation, 0.0, seed));
  }
  if (t_look >= 1) {
    std::vector<std::vector<double>> paths;
    for (std::uint64_t i = 0; i < n_look; ++i) paths.push_back(std::move(facts[i].lookahead_path));
    const auto d = lookahead_dominance_check(paths, t_look, mix64(seed ^ 0x6c6f6f6bULL), cfg.delta);
    rep.results.push_back(detail::threshold_result("lookahead_dominance", d.max_violation, d.slack, seed,
                                                   "t = " + std::to_string(t_look)));
  } else {
    InvariantResult r;
    r.name = "lookahead_dominance";
    r.vacuous = true;
    r.note = "horizon too short";
    rep.results.push_back(r);
  }
  {
    std::vector<double> r_tau;
    for (const auto& f : facts) {
      if (f.resolved) r_tau.push_back(f.r_at_tau_f);
    }
    if (r_tau.empty()) {
      InvariantResult r;
      r.name = "r_validity_at_tau_f";
      r.vacuous = true;
      r.note = "no resolved paths";
      rep.results.push_back(r);
    } else {
      const auto v = r_statistic_validity(r_tau, n_unresolved, cfg.delta);
      rep.results.push_back(detail::threshold_result("r_validity_at_tau_f", v.max_excess, v.slack, seed));
    }
  }
  {
    PathRng rng(mix64(seed ^ 0x756e6966ULL));
    std::vector<double> u(n);
    for (auto& x : u) x = rng.uniform();
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double hi = static_cast<double>(k + 1) / static_cast<double>(n);
      const double lo = static_cast<double>(k) / static_cast<double>(n);
      ks = std::max({ks, hi - u[k], u[k] - lo});
    }
    rep.results.push_back(detail::threshold_result("ecdf_calibration", ks, dkw_band(n, cfg.delta), seed));
  }
  {
    double viol = 0.0;
    const double lo = mu.support_min();
    const double hi = std::isfinite(mu.support_max()) ? mu.support_max() : lo + 50.0;
    double prev_ccdf = 2.0;
    double prev_bary = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 400; ++k) {
      const double x = lo - 0.5 + (hi - lo + 1.0) * k / 400.0;
      const double c = ccdf(mu, x);
      viol = std::max(viol, c - prev_ccdf);
      prev_ccdf = c;
      if (c > 0.0) {
        const double b = barycenter(mu, x);
        viol = std::max(viol, prev_bary - b);
        prev_bary = b;
      }
    }
    double prev_q = std::numeric_limits<double>::infinity();
    double prev_sq = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 400; ++k) {
      const double xi = k / 400.0;
      const double q = tail_quantile(mu, xi);
      const double sq = superquantile(mu, xi);
      viol = std::max({viol, q - prev_q, sq - prev_sq, q - sq});
      prev_q = q;
      prev_sq = sq;
    }
    rep.results.push_back(detail::threshold_result("distribution_monotonicity", viol, 1e-12, seed));
  }
  {
    PathRng rng(mix64(seed ^ 0x666f726dULL));
    const double tol = pot.mode() == PotentialMode::ClosedForm ? 1e-9 : 1e-7;
    double dev = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double s = std::exp(5.0 * rng.uniform());
      const double m = s * rng.uniform();
      dev = std::max(dev, ay_forms(pot, m, s).max_deviation());
    }
    rep.results.push_back(detail::threshold_result("ay_four_forms", dev, tol, seed, "200 random states"));
  }
  {
    const auto hl = run_hl_crosscheck(mu, std::max<std::uint64_t>(n, 1000), 50,
                                      mix64(seed ^ 0x686cULL), cfg.delta);
    rep.results.push_back(detail::threshold_result("hl_variational_crosscheck", hl.max_gap, hl.slack, seed));
  }
  {
    TauMuOptions opt;
    opt.lambda = cfg.lambda;
    opt.n_paths = n;
    opt.horizon = T;
    opt.seed = mix64(seed ^ 0x7461756dULL);
    opt.delta = cfg.delta;
    opt.threads = cfg.threads;
    const auto study = run_tau_mu_study(mu, opt);
    InvariantResult r;
    r.name = "tau_mu_calibration";
    r.seed = opt.seed;
    r.note = "censor rate " + std::to_string(study.censor_rate);
    if (!study.stopped_only) {
      r.vacuous = true;
    } else {
      const auto& sm = *study.stopped_only;
      r.passed = sm.status == StoppedMaxStatus::Passed;
      r.worst = sm.main ? std::max(sm.precondition.max_violation, sm.main->max_violation)
                        : sm.precondition.max_violation;
      r.tolerance = sm.precondition.slack;
    }
    rep.results.push_back(r);
  }
  for (const auto& sc : run_stop_rule_suite(n, mix64(seed ^ 0x73746f70ULL), cfg.delta, cfg.threads)) {
    InvariantResult r;
    r.name = "hl_maximal_" + sc.name;
    r.seed = mix64(seed ^ 0x73746f70ULL);
    r.tolerance = sc.report.precondition.slack;
    if (sc.expect_rejection) {
      r.passed = sc.report.status == StoppedMaxStatus::RejectedPrecondition;
      r.worst = sc.report.precondition.max_violation;
      r.note = "must be rejected by the precondition";
      r.tolerance = std::numeric_limits<double>::infinity();
    } else {
      r.passed = sc.report.status == StoppedMaxStatus::Passed;
      r.worst = sc.report.main ? sc.report.main->max_violation : sc.report.precondition.max_violation;
      r.note = "censored " + std::to_string(sc.n_censored);
    }
    rep.results.push_back(r);
  }
  return rep;
}

/// Sup-norm error of M -> B -> M per path.
struct RoundtripReport {
  std::string potential;
  std::vector<double> per_path_error;
  double max_error = 0.0;
  std::uint64_t worst_path = 0;
  double tolerance = 1e-9;
  bool passed = true;
};

inline RoundtripReport run_decomposition_roundtrip(const ExperimentConfig& cfg) {
  cfg.validate();
  const Potential pot = cfg.make_potential();
  RoundtripReport rep;
  rep.potential = potential_to_json(pot).dump();
  rep.per_path_error.assign(cfg.n_paths, 0.0);
  // Fails fast, before any simulation, when G is flat at the start.
  if (!(pot.Gprime(1.0) >= 1e-300)) {
    throw DegeneratePotential("roundtrip: the potential must be strictly increasing");
  }
  detail::parallel_for(cfg.n_paths, cfg.threads, [&](std::uint64_t i) {
    PathRng rng(path_seed(cfg.master_seed, i));
    PathState path = start_path();
    AYState ay = ay_start(pot);
    std::vector<double> m_path{1.0};
    std::vector<double> b_path{ay.b};
    double m = 1.0;
    double s = 1.0;
    for (std::uint64_t t = 0; t < cfg.horizon; ++t) {
      path = step_gaussian_exp(path, cfg.lambda, rng.normal());
      ay = ay_step(ay, pot, path.m(), path.s(), m, s);
      m = path.m();
      s = path.s();
      m_path.push_back(m);
      b_path.push_back(ay.b);
    }
    const MMPath back = mm_decompose(b_path, pot);
    double err = 0.0;
    for (std::size_t t = 0; t < m_path.size(); ++t) err = std::max(err, std::abs(back.m[t] - m_path[t]));
    rep.per_path_error[i] = err;
  });
  for (std::uint64_t i = 0; i < cfg.n_paths; ++i) {
    if (rep.per_path_error[i] > rep.max_error) {
      rep.max_error = rep.per_path_error[i];
      rep.worst_path = i;
    }
  }
  rep.passed = rep.max_error <= rep.tolerance;
  return rep;
}

}  // namespace peekstat
