#pragma once

// Batch driver for peeking experiments: one stream of null Gaussian
// increments per path feeds three p-value processes,
//
//   NaiveZ      the classical z-test p-value of the running sum (valid only at
//               a fixed time),
//   HValue      1 / W for the sub-Gaussian mixture martingale W,
//   RStatistic  R_t = min_{s <= t} M_s / S_s of the Gaussian exponential
//               martingale, consulted no later than the estimated final
//               record time,
//
// and every peeking strategy is replayed against each process.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "peekstat/detail/parallel.hpp"
#include "peekstat/error.hpp"
#include "peekstat/extrema.hpp"
#include "peekstat/json_io.hpp"
#include "peekstat/martingale.hpp"
#include "peekstat/random.hpp"

namespace peekstat {

enum class ProcessKind { NaiveZ, HValue, RStatistic };

inline std::string to_string(ProcessKind k) {
  switch (k) {
    case ProcessKind::NaiveZ:
      return "naive_z";
    case ProcessKind::HValue:
      return "h_value";
    case ProcessKind::RStatistic:
      return "r_statistic";
  }
  return "?";
}

inline ProcessKind process_from_string(const std::string& s) {
  if (s == "naive_z") return ProcessKind::NaiveZ;
  if (s == "h_value") return ProcessKind::HValue;
  if (s == "r_statistic") return ProcessKind::RStatistic;
  throw ConfigError("unknown process '" + s + "'");
}

/// How a peeker decides when to stop looking.
struct PeekStrategy {
  enum class Kind { FirstCrossing, MinOverHorizon, FixedTime, StopAtNewMin };

  Kind kind = Kind::StopAtNewMin;
  double alpha = 0.0;       // FirstCrossing
  std::uint64_t steps = 0;  // MinOverHorizon: T; FixedTime: t

  /// Stop at the first t with p_t <= alpha.
  static PeekStrategy first_crossing(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("first_crossing: alpha must lie in (0, 1)");
    return {Kind::FirstCrossing, alpha, 0};
  }
  /// Report min_{t <= T} p_t, stopping at the time it was attained.
  static PeekStrategy min_over_horizon(std::uint64_t T) {
    if (T == 0) throw ConfigError("min_over_horizon: T must be >= 1");
    return {Kind::MinOverHorizon, 0.0, T};
  }
  static PeekStrategy fixed_time(std::uint64_t t) {
    if (t == 0) throw ConfigError("fixed_time: t must be >= 1");
    return {Kind::FixedTime, 0.0, t};
  }
  /// Stop at the first t >= 2 whose p-value is a strict new minimum.
  static PeekStrategy stop_at_new_min() { return {Kind::StopAtNewMin, 0.0, 0}; }

  std::string label() const {
    char buf[64];
    switch (kind) {
      case Kind::FirstCrossing:
        std::snprintf(buf, sizeof buf, "first_crossing(%g)", alpha);
        return buf;
      case Kind::MinOverHorizon:
        return "min_over_horizon(" + std::to_string(steps) + ")";
      case Kind::FixedTime:
        return "fixed_time(" + std::to_string(steps) + ")";
      case Kind::StopAtNewMin:
        return "stop_at_new_min";
    }
    return "?";
  }

  bool operator==(const PeekStrategy&) const = default;
};

inline json strategy_to_json(const PeekStrategy& s) {
  switch (s.kind) {
    case PeekStrategy::Kind::FirstCrossing:
      return json{{"kind", "first_crossing"}, {"alpha", s.alpha}};
    case PeekStrategy::Kind::MinOverHorizon:
      return json{{"kind", "min_over_horizon"}, {"T", s.steps}};
    case PeekStrategy::Kind::FixedTime:
      return json{{"kind", "fixed_time"}, {"t", s.steps}};
    case PeekStrategy::Kind::StopAtNewMin:
      return json{{"kind", "stop_at_new_min"}};
  }
  return json();
}

inline PeekStrategy strategy_from_json(const json& j) {
  const json obj = j.is_string() ? json{{"kind", j}} : j;
  const std::string kind = detail::require_field(obj, "kind", "strategy").get<std::string>();
  const auto steps = [&](const char* key) {
    const json& v = detail::require_field(obj, key, "strategy");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
      throw ConfigError("strategy '" + kind + "': '" + key + "' must be an integer >= 1");
    }
    return v.get<std::uint64_t>();
  };
  if (kind == "first_crossing") {
    return PeekStrategy::first_crossing(detail::number_field(obj, "alpha", "strategy"));
  }
  if (kind == "min_over_horizon") return PeekStrategy::min_over_horizon(steps("T"));
  if (kind == "fixed_time") return PeekStrategy::fixed_time(steps("t"));
  if (kind == "stop_at_new_min") return PeekStrategy::stop_at_new_min();
  throw ConfigError("unknown strategy kind '" + kind + "'");
}

struct ExperimentConfig {
  std::uint64_t master_seed = 20240601;
  std::uint64_t n_paths = 1000;
  std::uint64_t horizon = 2000;
  double lambda = 1.0;  // Gaussian exponential martingale
  MixtureGrid mixture = MixtureGrid::geometric();
  std::vector<ProcessKind> processes{ProcessKind::NaiveZ, ProcessKind::HValue,
                                     ProcessKind::RStatistic};
  std::vector<PeekStrategy> strategies;  // empty: the default set for the horizon
  json potential = "log";
  json mu = json{{"kind", "uniform01"}, {"params", json::object()}};
  std::vector<double> alpha_levels{0.10, 0.05, 0.01};
  double decay_threshold = 1e-6;  // tau_F resolved once M_T / S_T falls below
  double delta = 0.01;            // DKW confidence for dominance checks
  std::string path_process = "gaussian_exp";  // or "mixture", for path dumps
  // Execution settings; not part of the experiment's identity.
  std::string output_dir = "peekstat-out";
  unsigned threads = 1;

  Potential make_potential() const { return potential_from_json(potential); }
  DistributionModel make_mu() const { return distribution_from_json(mu); }

  /// The configured strategies, or FirstCrossing(0.05), MinOverHorizon(T),
  /// FixedTime(T) and StopAtNewMin when none are given.
  std::vector<PeekStrategy> effective_strategies() const {
    if (!strategies.empty()) return strategies;
    const std::uint64_t h = std::max<std::uint64_t>(horizon, 1);
    return {PeekStrategy::first_crossing(0.05), PeekStrategy::min_over_horizon(h),
            PeekStrategy::fixed_time(h), PeekStrategy::stop_at_new_min()};
  }

  /// Rejects invalid configurations before anything is simulated. The
  /// invariant suite accepts a zero horizon (every check is then vacuous).
  void validate(bool allow_zero_horizon = false) const {
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    if (horizon < 1 && !allow_zero_horizon) throw ConfigError("horizon must be >= 1");
    if (!(lambda != 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and nonzero");
    try {
      mixture.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("mixture: ") + e.what());
    }
    if (processes.empty()) throw ConfigError("at least one process is required");
    std::set<ProcessKind> seen(processes.begin(), processes.end());
    if (seen.size() != processes.size()) throw ConfigError("processes must not repeat");
    for (const auto& s : effective_strategies()) {
      if ((s.kind == PeekStrategy::Kind::FixedTime || s.kind == PeekStrategy::Kind::MinOverHorizon) &&
          s.steps > horizon && horizon > 0) {
        throw ConfigError("strategy " + s.label() + " looks beyond the horizon " +
                          std::to_string(horizon));
      }
    }
    for (double a : alpha_levels) {
      if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha levels must lie in (0, 1)");
    }
    if (!(decay_threshold > 0.0 && decay_threshold < 1.0)) {
      throw ConfigError("decay_threshold must lie in (0, 1)");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (path_process != "gaussian_exp" && path_process != "mixture") {
      throw ConfigError("path_process must be 'gaussian_exp' or 'mixture'");
    }
    (void)make_potential();
    (void)make_mu();
  }
};

/// Everything that determines the experiment's numbers (threads and output
/// location excluded, so reports are comparable across machines).
inline json config_to_json(const ExperimentConfig& c) {
  json strategies = json::array();
  for (const auto& s : c.effective_strategies()) strategies.push_back(strategy_to_json(s));
  json processes = json::array();
  for (auto p : c.processes) processes.push_back(to_string(p));
  return json{{"master_seed", c.master_seed},
              {"n_paths", c.n_paths},
              {"horizon", c.horizon},
              {"process", {{"lambda", c.lambda}, {"mixture", mixture_to_json(c.mixture)}}},
              {"processes", processes},
              {"strategies", strategies},
              {"potential", c.potential},
              {"mu", c.mu},
              {"alpha_levels", c.alpha_levels},
              {"decay_threshold", c.decay_threshold},
              {"delta", c.delta},
              {"path_process", c.path_process}};
}

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "master_seed", "n_paths",   "horizon", "process",         "processes",
      "strategies",  "potential", "mu",      "alpha_levels",    "decay_threshold",
      "delta",       "path_process", "output_dir", "threads"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    const auto count = [&](const char* key, std::uint64_t& out) {
      if (!j.contains(key)) return;
      const json& v = j.at(key);
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(std::string("'") + key + "' must be a nonnegative integer");
      }
      out = v.get<std::uint64_t>();
    };
    count("master_seed", c.master_seed);
    count("n_paths", c.n_paths);
    count("horizon", c.horizon);
    if (j.contains("process")) {
      const json& p = j.at("process");
      if (p.contains("lambda")) c.lambda = p.at("lambda").get<double>();
      if (p.contains("mixture")) c.mixture = mixture_from_json(p.at("mixture"));
    }
    if (j.contains("processes")) {
      c.processes.clear();
      for (const auto& p : j.at("processes")) c.processes.push_back(process_from_string(p.get<std::string>()));
    }
    if (j.contains("strategies")) {
      for (const auto& s : j.at("strategies")) c.strategies.push_back(strategy_from_json(s));
    }
    if (j.contains("potential")) c.potential = j.at("potential");
    if (j.contains("mu")) c.mu = j.at("mu");
    if (j.contains("alpha_levels")) c.alpha_levels = j.at("alpha_levels").get<std::vector<double>>();
    if (j.contains("decay_threshold")) c.decay_threshold = j.at("decay_threshold").get<double>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("path_process")) c.path_process = j.at("path_process").get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

/// One path under one strategy and one process.
struct PeekRunRecord {
  std::uint64_t path = 0;
  std::uint32_t strategy = 0;  // index into the effective strategy list
  ProcessKind process = ProcessKind::NaiveZ;
  std::optional<std::uint64_t> stop_time;  // empty: censored at the horizon
  double reported_p = 1.0;                 // in (0, 1]
  std::optional<std::uint64_t> tau_f;      // empty: unresolved
  std::optional<std::uint64_t> rho_f;
};

/// Per-path facts about the Gaussian exponential martingale.
struct PathSummary {
  std::uint64_t path = 0;
  double log_s_final = 0.0;
  double final_ratio = 1.0;
  bool resolved = false;
  std::uint64_t tau_f = 0;
  std::uint64_t rho_f = 0;
  double r_at_tau_f = 1.0;
};

struct SummaryRow {
  ProcessKind process = ProcessKind::NaiveZ;
  std::uint32_t strategy = 0;
  double alpha = 0.05;
  std::uint64_t n_records = 0;
  std::uint64_t n_eligible = 0;  // records with a resolved tau_F when it matters
  std::uint64_t n_stopped = 0;
  std::uint64_t n_censored = 0;
  std::uint64_t n_rejections = 0;
  double rate = 0.0;
  double stderr_null = 0.0;  // sqrt(alpha (1 - alpha) / n_eligible)
};

struct PeekResult {
  ExperimentConfig config;
  std::vector<PeekStrategy> strategies;
  std::vector<PeekRunRecord> records;  // path-major, then process, then strategy
  std::vector<PathSummary> paths;
  std::vector<SummaryRow> summary;

  const SummaryRow* find(ProcessKind process, std::uint32_t strategy, double alpha) const {
    for (const auto& r : summary) {
      if (r.process == process && r.strategy == strategy && r.alpha == alpha) return &r;
    }
    return nullptr;
  }
};

namespace detail {

inline double clip_p(double p) {
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

// Replays every strategy against one p-value process expressed through an
// evidence value e_t (larger e means smaller p). The process only needs to
// supply e_t exactly when it is at least `threshold(t)`.
class EvidenceTracker {
 public:
  struct Outcome {
    bool done = false;
    std::optional<std::uint64_t> stop_time;
    double p = 1.0;
  };

  EvidenceTracker(const std::vector<PeekStrategy>& strategies, std::vector<double> crossing,
                  std::uint64_t horizon)
      : strategies_(strategies), crossing_(std::move(crossing)), horizon_(horizon),
        outcomes_(strategies.size()) {}

  /// Smallest evidence that can affect a decision at step t; -inf when the
  /// exact value is needed regardless, +inf when nothing is pending.
  double threshold(std::uint64_t t) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (t == horizon_ && pending_ > 0) return -inf;
    double thr = inf;
    for (std::size_t k = 0; k < strategies_.size(); ++k) {
      if (outcomes_[k].done) continue;
      const auto& s = strategies_[k];
      switch (s.kind) {
        case PeekStrategy::Kind::FirstCrossing:
          thr = std::min(thr, crossing_[k]);
          break;
        case PeekStrategy::Kind::MinOverHorizon:
        case PeekStrategy::Kind::StopAtNewMin:
          thr = std::min(thr, run_max_);
          break;
        case PeekStrategy::Kind::FixedTime:
          if (t == s.steps) return -inf;
          break;
      }
    }
    return thr;
  }

  bool finished() const { return pending_ == 0; }

  /// e is the exact evidence at t, or empty when it is known to lie below
  /// threshold(t). p_of maps evidence to the reported p-value.
  template <class PFn>
  void observe(std::uint64_t t, std::optional<double> e, PFn&& p_of) {
    const bool new_max = e && *e > run_max_;
    if (new_max) {
      run_max_ = *e;
      argmax_ = t;
    }
    for (std::size_t k = 0; k < strategies_.size(); ++k) {
      auto& out = outcomes_[k];
      if (out.done) continue;
      const auto& s = strategies_[k];
      switch (s.kind) {
        case PeekStrategy::Kind::FirstCrossing:
          if (e && *e >= crossing_[k] - 1e-9 * std::max(1.0, std::abs(crossing_[k]))) {
            const double p = p_of(*e);
            if (p <= s.alpha) finish(out, t, p);
          }
          break;
        case PeekStrategy::Kind::MinOverHorizon:
          if (t == s.steps) finish(out, argmax_, p_of(run_max_));
          break;
        case PeekStrategy::Kind::FixedTime:
          if (t == s.steps) finish(out, t, p_of(*e));
          break;
        case PeekStrategy::Kind::StopAtNewMin:
          if (t >= 2 && new_max) finish(out, t, p_of(*e));
          break;
      }
      if (!out.done && t == horizon_) {
        out.done = true;
        out.p = p_of(*e);
        --pending_;
      }
    }
  }

  const Outcome& outcome(std::size_t k) const { return outcomes_[k]; }

 private:
  void finish(Outcome& out, std::uint64_t t, double p) {
    out.done = true;
    out.stop_time = t;
    out.p = p;
    --pending_;
  }

  const std::vector<PeekStrategy>& strategies_;
  std::vector<double> crossing_;
  std::uint64_t horizon_;
  std::vector<Outcome> outcomes_;
  std::size_t pending_ = outcomes_.size();
  double run_max_ = -std::numeric_limits<double>::infinity();
  std::uint64_t argmax_ = 0;
};

// log W and d log W / dZ at (Z, V).
inline void mixture_log_and_slope(const MixtureGrid& g, const std::vector<double>& log_w, double z,
                                  double v, double& value, double& slope) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < log_w.size(); ++k) {
    const double lam = g.lambdas[k];
    hi = std::max(hi, log_w[k] + lam * z - 0.5 * lam * lam * v);
  }
  double acc = 0.0;
  double acc_lam = 0.0;
  for (std::size_t k = 0; k < log_w.size(); ++k) {
    const double lam = g.lambdas[k];
    const double e = std::exp(log_w[k] + lam * z - 0.5 * lam * lam * v - hi);
    acc += e;
    acc_lam += lam * e;
  }
  value = hi + std::log(acc);
  slope = acc_lam / acc;
}

// Lazy evaluation of log W against a moving threshold. Because log W is
// increasing in Z and decreasing in V, a level zeta with log W(zeta, V_c) < c
// certifies log W(Z, V) < c for every Z < zeta and V >= V_c. The level is
// found by Newton's method on the convex map Z -> log W(Z, V_c) and only
// refreshed when the threshold changes or a draw lands above it.
class MixtureThresholdCache {
 public:
  explicit MixtureThresholdCache(const MixtureEvaluator& ev) : ev_(ev) {
    for (double w : ev.grid().weights) log_w_.push_back(std::log(w));
  }

  std::optional<double> log_value_if_above(double z, double v, double threshold) {
    if (threshold == -std::numeric_limits<double>::infinity()) return ev_.log_value(z, v);
    const double cut = threshold - 1e-9 * std::max(1.0, std::abs(threshold));
    if (valid_ && cut == cut_ && v >= v_c_ && z < zeta_) return std::nullopt;
    const double exact = ev_.log_value(z, v);
    if (exact >= cut) return exact;
    refresh(z, v, cut);
    return std::nullopt;
  }

 private:
  void refresh(double z0, double v, double cut) {
    cut_ = cut;
    v_c_ = v;
    valid_ = true;
    zeta_ = z0;  // always safe: log W(z0, v) < cut
    double value = 0.0;
    double slope = 0.0;
    detail::mixture_log_and_slope(ev_.grid(), log_w_, z0, v, value, slope);
    // The tangent at z0 undershoots a convex function, so the first step lands
    // at or right of the root and later steps descend onto it.
    double z = z0 + (cut - value) / slope;
    double step = 0.0;
    for (int it = 0; it < 60; ++it) {
      detail::mixture_log_and_slope(ev_.grid(), log_w_, z, v, value, slope);
      step = (value - cut) / slope;
      z -= step;
      if (std::abs(step) <= 1e-12 * (1.0 + std::abs(z))) break;
    }
    const double candidate = z - 2.0 * std::abs(step) - 1e-12 * (1.0 + std::abs(z));
    if (candidate > zeta_ && ev_.log_value(candidate, v) < cut) zeta_ = candidate;
  }

  const MixtureEvaluator& ev_;
  std::vector<double> log_w_;
  bool valid_ = false;
  double cut_ = 0.0;
  double v_c_ = 0.0;
  double zeta_ = 0.0;
};

// |Z| / sqrt(t) level at which the two-sided z-test p-value equals alpha.
inline double naive_crossing_level(double alpha) {
  return detail::bisect_last_true([&](double e) { return std::erfc(e / std::sqrt(2.0)) >= alpha; },
                                  0.0, 40.0);
}

// Tracks R for the Gaussian exponential martingale and the event times each
// strategy needs; decisions are capped at the estimated final record time.
class RStatisticTracker {
 public:
  explicit RStatisticTracker(const std::vector<PeekStrategy>& strategies)
      : strategies_(strategies), events_(strategies.size()) {}

  void observe(std::uint64_t t, double log_m, double log_s) {
    const double prev_log_r = tracker_.log_r();
    tracker_.observe(t, log_m, log_s);
    if (t == 0) return;
    const double log_ratio = log_m - log_s;
    for (std::size_t k = 0; k < strategies_.size(); ++k) {
      auto& ev = events_[k];
      if (ev.seen) continue;
      const auto& s = strategies_[k];
      switch (s.kind) {
        case PeekStrategy::Kind::FirstCrossing:
          if (tracker_.log_r() <= std::log(s.alpha)) set(ev, t, tracker_.log_r());
          break;
        case PeekStrategy::Kind::MinOverHorizon:
          if (t == s.steps) set(ev, tracker_.argmin_r(), tracker_.log_r());
          break;
        case PeekStrategy::Kind::FixedTime:
          if (t == s.steps) set(ev, t, tracker_.log_r());
          break;
        case PeekStrategy::Kind::StopAtNewMin:
          if (t >= 2 && log_ratio < prev_log_r) set(ev, t, tracker_.log_r());
          break;
      }
    }
  }

  const FinalMaxTracker& tracker() const { return tracker_; }

  /// (stop time, reported R) for strategy k once the path is complete.
  std::pair<std::uint64_t, double> decision(std::size_t k) const {
    const auto& s = strategies_[k];
    const auto& ev = events_[k];
    const std::uint64_t tau = tracker_.tau_f();
    const double r_tau = tracker_.r_at_tau_f();
    if (s.kind == PeekStrategy::Kind::MinOverHorizon) {
      if (tau <= s.steps || !ev.seen) return {tracker_.rho_f(), r_tau};
      return {ev.t, std::exp(ev.log_r)};
    }
    if (ev.seen && ev.t <= tau) return {ev.t, std::exp(ev.log_r)};
    return {tau, r_tau};
  }

 private:
  struct Event {
    bool seen = false;
    std::uint64_t t = 0;
    double log_r = 0.0;
  };

  static void set(Event& ev, std::uint64_t t, double log_r) {
    ev.seen = true;
    ev.t = t;
    ev.log_r = log_r;
  }

  const std::vector<PeekStrategy>& strategies_;
  std::vector<Event> events_;
  FinalMaxTracker tracker_;
};

}  // namespace detail

/// Simulates cfg.n_paths null paths of cfg.horizon steps and replays every
/// strategy against every configured process.
inline PeekResult run_peek_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  PeekResult res;
  res.config = cfg;
  res.strategies = cfg.effective_strategies();
  const auto& strategies = res.strategies;
  const std::size_t n_strat = strategies.size();
  const std::size_t n_proc = cfg.processes.size();
  const std::size_t per_path = n_strat * n_proc;
  res.records.resize(cfg.n_paths * per_path);
  res.paths.resize(cfg.n_paths);

  const MixtureEvaluator evaluator(cfg.mixture);
  std::vector<double> naive_cross(n_strat, 0.0);
  std::vector<double> h_cross(n_strat, 0.0);
  for (std::size_t k = 0; k < n_strat; ++k) {
    if (strategies[k].kind == PeekStrategy::Kind::FirstCrossing) {
      naive_cross[k] = detail::naive_crossing_level(strategies[k].alpha);
      h_cross[k] = -std::log(strategies[k].alpha);
    }
  }
  const auto has = [&](ProcessKind k) {
    return std::find(cfg.processes.begin(), cfg.processes.end(), k) != cfg.processes.end();
  };
  const bool want_naive = has(ProcessKind::NaiveZ);
  const bool want_h = has(ProcessKind::HValue);

  detail::parallel_for(cfg.n_paths, cfg.threads, [&](std::uint64_t i) {
    PathRng rng(path_seed(cfg.master_seed, i));
    detail::EvidenceTracker naive(strategies, naive_cross, cfg.horizon);
    detail::EvidenceTracker hval(strategies, h_cross, cfg.horizon);
    detail::MixtureThresholdCache cache(evaluator);
    detail::RStatisticTracker rstat(strategies);
    const double lambda = cfg.lambda;
    double z_sum = 0.0;
    double log_m = 0.0;
    double log_s = 0.0;
    rstat.observe(0, 0.0, 0.0);

    const auto naive_p = [](double e) { return detail::clip_p(std::erfc(e / std::sqrt(2.0))); };
    const auto h_p = [](double e) { return detail::clip_p(std::exp(-e)); };

    for (std::uint64_t t = 1; t <= cfg.horizon; ++t) {
      const double z = rng.normal();
      z_sum += z;
      log_m += lambda * z - 0.5 * lambda * lambda;
      log_s = std::max(log_s, log_m);
      const double v = static_cast<double>(t);
      if (want_naive && !naive.finished()) {
        naive.observe(t, std::abs(z_sum) / std::sqrt(v), naive_p);
      }
      if (want_h && !hval.finished()) {
        const double thr = hval.threshold(t);
        std::optional<double> e;
        if (thr != std::numeric_limits<double>::infinity()) e = cache.log_value_if_above(z_sum, v, thr);
        // p = min(1, 1/W): evidence below 0 is indistinguishable from 0.
        if (e) e = std::max(*e, 0.0);
        hval.observe(t, e, h_p);
      }
      rstat.observe(t, log_m, log_s);
    }

    const auto& tr = rstat.tracker();
    PathSummary& ps = res.paths[i];
    ps.path = i;
    ps.log_s_final = log_s;
    ps.final_ratio = tr.final_ratio();
    ps.resolved = tr.resolved(cfg.decay_threshold);
    ps.tau_f = tr.tau_f();
    ps.rho_f = tr.rho_f();
    ps.r_at_tau_f = tr.r_at_tau_f();

    for (std::size_t pi = 0; pi < n_proc; ++pi) {
      for (std::size_t k = 0; k < n_strat; ++k) {
        PeekRunRecord& rec = res.records[i * per_path + pi * n_strat + k];
        rec.path = i;
        rec.strategy = static_cast<std::uint32_t>(k);
        rec.process = cfg.processes[pi];
        if (ps.resolved) {
          rec.tau_f = ps.tau_f;
          rec.rho_f = ps.rho_f;
        }
        switch (rec.process) {
          case ProcessKind::NaiveZ:
            rec.stop_time = naive.outcome(k).stop_time;
            rec.reported_p = naive.outcome(k).p;
            break;
          case ProcessKind::HValue:
            rec.stop_time = hval.outcome(k).stop_time;
            rec.reported_p = hval.outcome(k).p;
            break;
          case ProcessKind::RStatistic: {
            const auto [t_stop, r] = rstat.decision(k);
            rec.stop_time = t_stop;
            rec.reported_p = detail::clip_p(r);
            break;
          }
        }
      }
    }
  });

  for (std::size_t pi = 0; pi < n_proc; ++pi) {
    for (std::size_t k = 0; k < n_strat; ++k) {
      for (double alpha : cfg.alpha_levels) {
        SummaryRow row;
        row.process = cfg.processes[pi];
        row.strategy = static_cast<std::uint32_t>(k);
        row.alpha = alpha;
        for (std::uint64_t i = 0; i < cfg.n_paths; ++i) {
          const auto& rec = res.records[i * per_path + pi * n_strat + k];
          ++row.n_records;
          if (rec.process == ProcessKind::RStatistic && !rec.tau_f) continue;
          ++row.n_eligible;
          if (rec.stop_time) {
            ++row.n_stopped;
          } else {
            ++row.n_censored;
          }
          if (rec.reported_p <= alpha) ++row.n_rejections;
        }
        if (row.n_eligible > 0) {
          const auto n = static_cast<double>(row.n_eligible);
          row.rate = static_cast<double>(row.n_rejections) / n;
          row.stderr_null = std::sqrt(alpha * (1.0 - alpha) / n);
        }
        res.summary.push_back(row);
      }
    }
  }
  return res;
}

}  // namespace peekstat
