// Command-line driver: simulate, peek, verify and roundtrip subcommands, each
// reading an optional JSON config and writing reports into --out.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "peekstat/peekstat.hpp"

namespace {

struct Overrides {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> paths;
  std::optional<std::uint64_t> horizon;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

void add_common_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_file, "JSON experiment configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--paths", o.paths, "number of simulated paths");
  cmd->add_option("--horizon", o.horizon, "steps per path");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads (results do not depend on it)");
}

peekstat::ExperimentConfig load_config(const Overrides& o) {
  peekstat::ExperimentConfig cfg;
  if (!o.config_file.empty()) {
    std::ifstream is(o.config_file);
    if (!is) throw peekstat::IoError("cannot read config '" + o.config_file + "'");
    std::stringstream buf;
    buf << is.rdbuf();
    peekstat::json j;
    try {
      j = peekstat::json::parse(buf.str());
    } catch (const peekstat::json::exception& e) {
      throw peekstat::ConfigError("config '" + o.config_file + "': " + e.what());
    }
    cfg = peekstat::config_from_json(j);
  }
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.paths) cfg.n_paths = *o.paths;
  if (o.horizon) cfg.horizon = *o.horizon;
  if (o.out) cfg.output_dir = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  return cfg;
}

void print_peek_summary(const peekstat::PeekResult& res) {
  std::printf("%-12s %-26s %6s %10s %10s %10s %10s\n", "process", "strategy", "alpha", "eligible",
              "censored", "rate", "stderr");
  for (const auto& r : res.summary) {
    std::printf("%-12s %-26s %6.3g %10llu %10llu %10.5f %10.5f\n", peekstat::to_string(r.process).c_str(),
                res.strategies[r.strategy].label().c_str(), r.alpha,
                static_cast<unsigned long long>(r.n_eligible),
                static_cast<unsigned long long>(r.n_censored), r.rate, r.stderr_null);
  }
}

void print_invariants(const peekstat::InvariantReport& rep) {
  for (const auto& r : rep.results) {
    const char* status = r.vacuous ? "VACUOUS" : (r.passed ? "PASS" : "FAIL");
    std::printf("%-8s %-34s worst=%-12.4g tol=%-12.4g", status, r.name.c_str(), r.worst, r.tolerance);
    if (r.path) {
      std::printf(" path=%llu step=%llu seed=0x%016llx", static_cast<unsigned long long>(*r.path),
                  static_cast<unsigned long long>(r.step.value_or(0)),
                  static_cast<unsigned long long>(r.seed));
    }
    if (!r.note.empty()) std::printf("  (%s)", r.note.c_str());
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peekstat: peeking-robust p-values, running maxima and Azema-Yor processes"};
  app.require_subcommand(1);
  Overrides sim_o, peek_o, verify_o, rt_o;
  auto* sim = app.add_subcommand("simulate", "dump martingale, extrema and AY traces");
  auto* peek = app.add_subcommand("peek", "replay peeking strategies against three p-value processes");
  auto* verify = app.add_subcommand("verify", "run every pathwise identity and dominance check");
  auto* rt = app.add_subcommand("roundtrip", "reconstruct M from its Bachelier process B");
  add_common_options(sim, sim_o);
  add_common_options(peek, peek_o);
  add_common_options(verify, verify_o);
  add_common_options(rt, rt_o);
  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto cfg = load_config(sim_o);
      peekstat::emit_simulation(cfg, cfg.output_dir);
      std::printf("wrote %s/{paths,extrema,ay}.csv\n", cfg.output_dir.c_str());
      return 0;
    }
    if (peek->parsed()) {
      const auto cfg = load_config(peek_o);
      const auto res = peekstat::run_peek_experiment(cfg);
      peekstat::emit_report(res, cfg.output_dir);
      print_peek_summary(res);
      return 0;
    }
    if (verify->parsed()) {
      const auto cfg = load_config(verify_o);
      const auto rep = peekstat::run_invariant_suite(cfg);
      peekstat::emit_invariant_report(rep, cfg, cfg.output_dir);
      print_invariants(rep);
      if (rep.all_vacuous()) std::printf("all checks vacuous\n");
      return rep.exit_code();
    }
    if (rt->parsed()) {
      const auto cfg = load_config(rt_o);
      const auto rep = peekstat::run_decomposition_roundtrip(cfg);
      peekstat::emit_roundtrip_report(rep, cfg, cfg.output_dir);
      std::printf("%s max sup-norm error %.3g (path %llu), tolerance %.3g\n",
                  rep.passed ? "PASS" : "FAIL", rep.max_error,
                  static_cast<unsigned long long>(rep.worst_path), rep.tolerance);
      return rep.passed ? 0 : 1;
    }
  } catch (const peekstat::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const peekstat::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
