#include "peekstat/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "peekstat/report.hpp"

namespace {

using peekstat::ExperimentConfig;
using peekstat::PeekStrategy;
using peekstat::ProcessKind;

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("peekstat_test_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.master_seed = 7;
  c.n_paths = 400;
  c.horizon = 600;
  c.strategies = {PeekStrategy::first_crossing(0.05), PeekStrategy::min_over_horizon(600),
                  PeekStrategy::min_over_horizon(40), PeekStrategy::fixed_time(600),
                  PeekStrategy::fixed_time(25), PeekStrategy::stop_at_new_min()};
  return c;
}

// Brute-force replay of one strategy against a fully evaluated p-value path
// p[1..T] (p[0] unused). Returns (stop time or 0 if censored, reported p).
std::pair<std::uint64_t, double> replay(const PeekStrategy& s, const std::vector<double>& p) {
  const std::uint64_t T = p.size() - 1;
  switch (s.kind) {
    case PeekStrategy::Kind::FirstCrossing:
      for (std::uint64_t t = 1; t <= T; ++t) {
        if (p[t] <= s.alpha) return {t, p[t]};
      }
      return {0, p[T]};
    case PeekStrategy::Kind::MinOverHorizon: {
      std::uint64_t best = 1;
      for (std::uint64_t t = 2; t <= s.steps; ++t) {
        if (p[t] < p[best]) best = t;
      }
      return {best, p[best]};
    }
    case PeekStrategy::Kind::FixedTime:
      return {s.steps, p[s.steps]};
    case PeekStrategy::Kind::StopAtNewMin: {
      double lowest = p[1];
      for (std::uint64_t t = 2; t <= T; ++t) {
        if (p[t] < lowest) return {t, p[t]};
        lowest = std::min(lowest, p[t]);
      }
      return {0, p[T]};
    }
  }
  return {0, 1.0};
}

TEST(PeekStrategy, FactoriesValidateAndLabel) {
  EXPECT_THROW(PeekStrategy::first_crossing(0.0), peekstat::ConfigError);
  EXPECT_THROW(PeekStrategy::first_crossing(1.0), peekstat::ConfigError);
  EXPECT_THROW(PeekStrategy::min_over_horizon(0), peekstat::ConfigError);
  EXPECT_THROW(PeekStrategy::fixed_time(0), peekstat::ConfigError);
  EXPECT_EQ(PeekStrategy::first_crossing(0.05).label(), "first_crossing(0.05)");
  EXPECT_EQ(PeekStrategy::min_over_horizon(100).label(), "min_over_horizon(100)");
  EXPECT_EQ(PeekStrategy::fixed_time(7).label(), "fixed_time(7)");
  EXPECT_EQ(PeekStrategy::stop_at_new_min().label(), "stop_at_new_min");
}

TEST(ExperimentConfig, ValidationErrors) {
  const auto expect_bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), peekstat::ConfigError);
    EXPECT_THROW(peekstat::run_peek_experiment(c), peekstat::ConfigError);
  };
  expect_bad([](ExperimentConfig& c) { c.n_paths = 0; });
  expect_bad([](ExperimentConfig& c) { c.horizon = 0; });
  expect_bad([](ExperimentConfig& c) { c.lambda = 0.0; });
  expect_bad([](ExperimentConfig& c) { c.processes.clear(); });
  expect_bad([](ExperimentConfig& c) { c.processes = {ProcessKind::NaiveZ, ProcessKind::NaiveZ}; });
  expect_bad([](ExperimentConfig& c) { c.strategies = {PeekStrategy::fixed_time(c.horizon + 1)}; });
  expect_bad([](ExperimentConfig& c) { c.strategies = {PeekStrategy::min_over_horizon(c.horizon + 1)}; });
  expect_bad([](ExperimentConfig& c) { c.alpha_levels = {0.05, 1.0}; });
  expect_bad([](ExperimentConfig& c) { c.decay_threshold = 0.0; });
  expect_bad([](ExperimentConfig& c) { c.delta = 1.0; });
  expect_bad([](ExperimentConfig& c) { c.path_process = "brownian"; });
  expect_bad([](ExperimentConfig& c) { c.potential = "sqrt"; });
  expect_bad([](ExperimentConfig& c) { c.mu = peekstat::json{{"kind", "cauchy"}}; });
  expect_bad([](ExperimentConfig& c) { c.mixture.weights[0] *= 2.0; });
}

TEST(RunPeekExperiment, AccountingIdentities) {
  const auto cfg = small_config();
  const auto res = peekstat::run_peek_experiment(cfg);
  const std::size_t n_strat = cfg.strategies.size();
  ASSERT_EQ(res.records.size(), cfg.n_paths * n_strat * cfg.processes.size());
  ASSERT_EQ(res.paths.size(), cfg.n_paths);
  ASSERT_EQ(res.summary.size(), cfg.processes.size() * n_strat * cfg.alpha_levels.size());
  for (const auto& row : res.summary) {
    EXPECT_EQ(row.n_records, cfg.n_paths);
    EXPECT_EQ(row.n_stopped + row.n_censored, row.n_eligible);
    EXPECT_LE(row.n_eligible, row.n_records);
    if (row.process != ProcessKind::RStatistic) EXPECT_EQ(row.n_eligible, cfg.n_paths);
    if (row.n_eligible > 0) {
      EXPECT_DOUBLE_EQ(row.stderr_null, std::sqrt(row.alpha * (1 - row.alpha) / row.n_eligible));
    }
  }
  for (const auto& rec : res.records) {
    EXPECT_GT(rec.reported_p, 0.0);
    EXPECT_LE(rec.reported_p, 1.0);
    if (rec.stop_time) EXPECT_LE(*rec.stop_time, cfg.horizon);
    const auto& s = res.strategies[rec.strategy];
    if (s.kind == PeekStrategy::Kind::FixedTime || s.kind == PeekStrategy::Kind::MinOverHorizon) {
      if (rec.process != ProcessKind::RStatistic) EXPECT_TRUE(rec.stop_time.has_value());
    }
    if (rec.process == ProcessKind::RStatistic) {
      EXPECT_TRUE(rec.stop_time.has_value());
      const auto& ps = res.paths[rec.path];
      if (s.kind != PeekStrategy::Kind::MinOverHorizon) EXPECT_LE(*rec.stop_time, ps.tau_f);
    }
    EXPECT_EQ(rec.tau_f.has_value(), res.paths[rec.path].resolved);
  }
}

TEST(RunPeekExperiment, MatchesBruteForceReplay) {
  // Independent oracle: regenerate each path's draws, evaluate both p-value
  // processes at every step and replay the strategies naively.
  const auto cfg = small_config();
  const auto res = peekstat::run_peek_experiment(cfg);
  const std::size_t n_strat = cfg.strategies.size();
  const std::size_t n_proc = cfg.processes.size();
  for (std::uint64_t i = 0; i < cfg.n_paths; ++i) {
    peekstat::PathRng rng(peekstat::path_seed(cfg.master_seed, i));
    std::vector<double> naive{1.0};
    std::vector<double> hval{1.0};
    double z = 0.0;
    for (std::uint64_t t = 1; t <= cfg.horizon; ++t) {
      z += rng.normal();
      const double v = static_cast<double>(t);
      naive.push_back(std::max(std::erfc(std::abs(z) / std::sqrt(2.0 * v)), std::numeric_limits<double>::min()));
      hval.push_back(std::clamp(std::exp(-peekstat::mixture_log_value(cfg.mixture, z, v)),
                                std::numeric_limits<double>::min(), 1.0));
    }
    for (std::size_t pi = 0; pi < n_proc; ++pi) {
      const auto proc = cfg.processes[pi];
      if (proc == ProcessKind::RStatistic) continue;
      const auto& p = proc == ProcessKind::NaiveZ ? naive : hval;
      for (std::size_t k = 0; k < n_strat; ++k) {
        const auto& rec = res.records[i * n_strat * n_proc + pi * n_strat + k];
        ASSERT_EQ(rec.path, i);
        ASSERT_EQ(rec.process, proc);
        ASSERT_EQ(rec.strategy, k);
        const auto [t_stop, p_ref] = replay(cfg.strategies[k], p);
        ASSERT_EQ(rec.stop_time.value_or(0), t_stop)
            << peekstat::to_string(proc) << " " << cfg.strategies[k].label() << " path " << i;
        ASSERT_NEAR(rec.reported_p, p_ref, 1e-12 * p_ref)
            << peekstat::to_string(proc) << " " << cfg.strategies[k].label() << " path " << i;
      }
    }
  }
}

TEST(RunPeekExperiment, RStatisticMatchesBruteForce) {
  const auto cfg = small_config();
  const auto res = peekstat::run_peek_experiment(cfg);
  const std::size_t n_strat = cfg.strategies.size();
  const std::size_t n_proc = cfg.processes.size();
  const std::size_t pi = 2;
  ASSERT_EQ(cfg.processes[pi], ProcessKind::RStatistic);
  for (std::uint64_t i = 0; i < cfg.n_paths; ++i) {
    peekstat::PathRng rng(peekstat::path_seed(cfg.master_seed, i));
    std::vector<double> ratio{1.0};  // M_t / S_t
    std::vector<double> r{1.0};      // running min
    double log_m = 0.0;
    double log_s = 0.0;
    std::uint64_t tau = 0;
    for (std::uint64_t t = 1; t <= cfg.horizon; ++t) {
      log_m += cfg.lambda * rng.normal() - 0.5 * cfg.lambda * cfg.lambda;
      log_s = std::max(log_s, log_m);
      if (log_m >= log_s) tau = t;
      ratio.push_back(std::exp(log_m - log_s));
      r.push_back(std::min(r.back(), ratio.back()));
    }
    const bool resolved = ratio.back() < cfg.decay_threshold;
    ASSERT_EQ(res.paths[i].tau_f, tau);
    ASSERT_EQ(res.paths[i].resolved, resolved);
    for (std::size_t k = 0; k < n_strat; ++k) {
      const auto& s = cfg.strategies[k];
      const auto& rec = res.records[i * n_strat * n_proc + pi * n_strat + k];
      // Reference decision on R, capped at tau_F.
      std::uint64_t stop = 0;
      switch (s.kind) {
        case PeekStrategy::Kind::FirstCrossing:
          stop = tau;
          for (std::uint64_t t = 1; t <= tau; ++t) {
            if (r[t] <= s.alpha) {
              stop = t;
              break;
            }
          }
          break;
        case PeekStrategy::Kind::MinOverHorizon: {
          const std::uint64_t end = std::min<std::uint64_t>(s.steps, tau);
          stop = 0;
          for (std::uint64_t t = 1; t <= end; ++t) {
            if (ratio[t] <= ratio[stop]) stop = t;
          }
          break;
        }
        case PeekStrategy::Kind::FixedTime:
          stop = std::min<std::uint64_t>(s.steps, tau);
          break;
        case PeekStrategy::Kind::StopAtNewMin:
          stop = tau;
          for (std::uint64_t t = 2; t <= tau; ++t) {
            if (ratio[t] < r[t - 1]) {
              stop = t;
              break;
            }
          }
          break;
      }
      ASSERT_EQ(rec.stop_time.value_or(~0ull), stop) << s.label() << " path " << i;
      ASSERT_NEAR(rec.reported_p, std::max(r[stop], std::numeric_limits<double>::min()), 1e-12 * r[stop])
          << s.label() << " path " << i;
    }
  }
}

TEST(RunPeekExperiment, FixedTimeNaiveIsCalibrated) {
  ExperimentConfig c;
  c.n_paths = 100000;
  c.horizon = 30;
  c.processes = {ProcessKind::NaiveZ};
  c.strategies = {PeekStrategy::fixed_time(30), PeekStrategy::min_over_horizon(30)};
  c.alpha_levels = {0.05};
  c.threads = 4;
  const auto res = peekstat::run_peek_experiment(c);
  const auto* fixed = res.find(ProcessKind::NaiveZ, 0, 0.05);
  const auto* peek = res.find(ProcessKind::NaiveZ, 1, 0.05);
  ASSERT_NE(fixed, nullptr);
  ASSERT_NE(peek, nullptr);
  EXPECT_LE(std::abs(fixed->rate - 0.05), 3.0 * fixed->stderr_null) << fixed->rate;
  EXPECT_GT(peek->rate, 0.05 + 3.0 * peek->stderr_null) << peek->rate;
}

TEST(RunPeekExperiment, HValueSurvivesPeeking) {
  ExperimentConfig c;
  c.n_paths = 20000;
  c.horizon = 1000;
  c.processes = {ProcessKind::HValue};
  c.strategies = {PeekStrategy::min_over_horizon(1000), PeekStrategy::first_crossing(0.05),
                  PeekStrategy::stop_at_new_min()};
  c.threads = 4;
  const auto res = peekstat::run_peek_experiment(c);
  for (const auto& row : res.summary) {
    EXPECT_LE(row.rate, row.alpha + 3.0 * row.stderr_null)
        << res.strategies[row.strategy].label() << " alpha=" << row.alpha;
  }
}

TEST(RunPeekExperiment, ResultsDoNotDependOnThreadCount) {
  auto cfg = small_config();
  cfg.threads = 1;
  const auto a = peekstat::run_peek_experiment(cfg);
  cfg.threads = 5;
  const auto b = peekstat::run_peek_experiment(cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    ASSERT_EQ(a.records[i].stop_time, b.records[i].stop_time);
    ASSERT_EQ(a.records[i].reported_p, b.records[i].reported_p);
    ASSERT_EQ(a.records[i].tau_f, b.records[i].tau_f);
  }
  const auto d1 = scratch("t1");
  const auto d5 = scratch("t5");
  peekstat::emit_report(a, d1);
  peekstat::emit_report(b, d5);
  for (const char* f : {"summary.json", "records.csv", "paths.csv"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d5 / f)) << f;
  }
}

TEST(EmitReport, FilesAndSchema) {
  auto cfg = small_config();
  cfg.n_paths = 20;
  const auto res = peekstat::run_peek_experiment(cfg);
  const auto dir = scratch("schema");
  peekstat::emit_report(res, dir);
  const auto summary = peekstat::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary.at("schema_version"), 1);
  EXPECT_EQ(summary.at("command"), "peek");
  EXPECT_TRUE(summary.contains("build"));
  EXPECT_EQ(summary.at("config").at("master_seed"), cfg.master_seed);
  EXPECT_EQ(summary.at("rows").size(), res.summary.size());
  EXPECT_EQ(summary.at("accounting").at("n_records"), res.records.size());

  const std::string records = slurp(dir / "records.csv");
  EXPECT_EQ(records.substr(0, records.find('\n')), "path,strategy,process,stop_time,reported_p,tau_F,rho_F");
  EXPECT_EQ(static_cast<std::size_t>(std::count(records.begin(), records.end(), '\n')), res.records.size() + 1);
  const std::string paths = slurp(dir / "paths.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(paths.begin(), paths.end(), '\n')), cfg.n_paths + 1);
}

TEST(EmitReport, EmptyExperimentIsValidJson) {
  const peekstat::PeekResult empty;
  const auto dir = scratch("empty");
  peekstat::emit_report(empty, dir);
  const auto summary = peekstat::json::parse(slurp(dir / "summary.json"));
  EXPECT_TRUE(summary.at("rows").is_array());
  EXPECT_TRUE(summary.at("rows").empty());
  EXPECT_EQ(summary.at("accounting").at("n_records"), 0);
}

TEST(EmitReport, UnwritableDirectoryNamesTheFile) {
  const auto base = scratch("blocked");
  fs::create_directories(base);
  const fs::path file = base / "not_a_dir";
  std::ofstream(file) << "x";
  try {
    peekstat::emit_report(peekstat::PeekResult{}, file / "out");
    FAIL() << "expected IoError";
  } catch (const peekstat::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("not_a_dir"), std::string::npos) << e.what();
  }
}

TEST(EmitReport, RerunIsByteIdentical) {
  const auto cfg = small_config();
  const auto d1 = scratch("rerun1");
  const auto d2 = scratch("rerun2");
  peekstat::emit_report(peekstat::run_peek_experiment(cfg), d1);
  peekstat::emit_report(peekstat::run_peek_experiment(cfg), d2);
  for (const char* f : {"summary.json", "records.csv", "paths.csv"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
}

TEST(EmitSimulation, TraceColumns) {
  ExperimentConfig c;
  c.n_paths = 3;
  c.horizon = 50;
  c.potential = peekstat::json{{"tail_quantile_of", {{"kind", "uniform01"}}}};
  const auto dir = scratch("simulate");
  peekstat::emit_simulation(c, dir);
  const auto header = [&](const char* f) {
    const std::string s = slurp(dir / f);
    return s.substr(0, s.find('\n'));
  };
  EXPECT_EQ(header("paths.csv"), "path,t,M,S,V,H");
  EXPECT_EQ(header("extrema.csv"), "path,t,M,S,M_over_S,Q,L,R");
  EXPECT_EQ(header("ay.csv"), "path,t,M,S,Y,Ymax,B,stopped");
  const std::string paths = slurp(dir / "paths.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(paths.begin(), paths.end(), '\n')), 3 * 51 + 1);
}

}  // namespace
