#pragma once

// Report writers. Every file is a pure function of the results it is given:
// numbers are printed with %.17g, rows are ordered by path index, and nothing
// time- or host-dependent is recorded, so reruns are byte-identical.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "peekstat/ay.hpp"
#include "peekstat/error.hpp"
#include "peekstat/extrema.hpp"
#include "peekstat/harness.hpp"
#include "peekstat/invariants.hpp"
#include "peekstat/json_io.hpp"
#include "peekstat/martingale.hpp"
#include "peekstat/random.hpp"

#ifndef PEEKSTAT_BUILD_ID
#define PEEKSTAT_BUILD_ID "unknown"
#endif

namespace peekstat {

inline constexpr int kReportSchemaVersion = 1;

inline std::string build_id() { return PEEKSTAT_BUILD_ID; }

namespace detail {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void append_row(std::string& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline void write_file(const std::filesystem::path& file, const std::string& content) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  os.close();
  if (!os) throw IoError("failed writing '" + file.string() + "'");
}

inline json report_header(const char* command, const ExperimentConfig& cfg) {
  return json{{"schema_version", kReportSchemaVersion},
              {"tool", "peekstat"},
              {"command", command},
              {"build", build_id()},
              {"config", config_to_json(cfg)}};
}

inline std::string opt_steps(const std::optional<std::uint64_t>& v, const char* missing) {
  return v ? std::to_string(*v) : std::string(missing);
}

}  // namespace detail

/// summary.json, records.csv and paths.csv for a peeking experiment.
inline void emit_report(const PeekResult& res, const std::filesystem::path& dir) {
  detail::ensure_directory(dir);
  json summary = detail::report_header("peek", res.config);
  json labels = json::array();
  for (const auto& s : res.strategies) labels.push_back(s.label());
  summary["strategies"] = labels;

  json per = json::array();
  const std::size_t n_strat = res.strategies.size();
  const std::size_t n_proc = res.config.processes.size();
  for (std::size_t pi = 0; pi < n_proc; ++pi) {
    for (std::size_t k = 0; k < n_strat; ++k) {
      std::uint64_t stopped = 0;
      std::uint64_t censored = 0;
      std::uint64_t unresolved = 0;
      for (const auto& rec : res.records) {
        if (rec.process != res.config.processes[pi] || rec.strategy != k) continue;
        (rec.stop_time ? stopped : censored) += 1;
        unresolved += rec.tau_f ? 0 : 1;
      }
      per.push_back({{"process", to_string(res.config.processes[pi])},
                     {"strategy", res.strategies[k].label()},
                     {"stopped", stopped},
                     {"censored", censored},
                     {"tau_f_unresolved", unresolved}});
    }
  }
  summary["accounting"] = {{"n_paths", res.paths.size()},
                           {"n_strategies", n_strat},
                           {"n_processes", n_proc},
                           {"n_records", res.records.size()},
                           {"per_process_strategy", per}};
  json rows = json::array();
  for (const auto& r : res.summary) {
    rows.push_back({{"process", to_string(r.process)},
                    {"strategy", res.strategies[r.strategy].label()},
                    {"alpha", r.alpha},
                    {"n_records", r.n_records},
                    {"n_eligible", r.n_eligible},
                    {"n_stopped", r.n_stopped},
                    {"n_censored", r.n_censored},
                    {"n_rejections", r.n_rejections},
                    {"type1_rate", r.rate},
                    {"stderr", r.stderr_null}});
  }
  summary["rows"] = rows;
  detail::write_file(dir / "summary.json", summary.dump(2) + "\n");

  std::string records = "path,strategy,process,stop_time,reported_p,tau_F,rho_F\n";
  records.reserve(res.records.size() * 64);
  for (const auto& r : res.records) {
    detail::append_row(records, {std::to_string(r.path), res.strategies[r.strategy].label(),
                                 to_string(r.process), detail::opt_steps(r.stop_time, "censored"),
                                 detail::fmt(r.reported_p), detail::opt_steps(r.tau_f, "unresolved"),
                                 detail::opt_steps(r.rho_f, "unresolved")});
  }
  detail::write_file(dir / "records.csv", records);

  std::string paths = "path,log_S_T,final_ratio,resolved,tau_F,rho_F,R_tau_F\n";
  for (const auto& p : res.paths) {
    detail::append_row(paths, {std::to_string(p.path), detail::fmt(p.log_s_final),
                               detail::fmt(p.final_ratio), p.resolved ? "1" : "0",
                               std::to_string(p.tau_f), std::to_string(p.rho_f),
                               detail::fmt(p.r_at_tau_f)});
  }
  detail::write_file(dir / "paths.csv", paths);
}

inline json invariant_report_json(const InvariantReport& rep, const ExperimentConfig& cfg) {
  json out = detail::report_header("verify", cfg);
  out["all_passed"] = rep.all_passed();
  out["all_vacuous"] = rep.all_vacuous();
  json items = json::array();
  for (const auto& r : rep.results) {
    json j{{"name", r.name},
           {"passed", r.passed},
           {"vacuous", r.vacuous},
           {"worst", r.worst},
           {"tolerance", r.tolerance},
           {"seed", r.seed},
           {"note", r.note}};
    j["path"] = r.path ? json(*r.path) : json(nullptr);
    j["step"] = r.step ? json(*r.step) : json(nullptr);
    items.push_back(j);
  }
  out["invariants"] = items;
  return out;
}

inline void emit_invariant_report(const InvariantReport& rep, const ExperimentConfig& cfg,
                                  const std::filesystem::path& dir) {
  detail::ensure_directory(dir);
  detail::write_file(dir / "summary.json", invariant_report_json(rep, cfg).dump(2) + "\n");
}

inline void emit_roundtrip_report(const RoundtripReport& rep, const ExperimentConfig& cfg,
                                  const std::filesystem::path& dir) {
  detail::ensure_directory(dir);
  json out = detail::report_header("roundtrip", cfg);
  out["potential"] = json::parse(rep.potential);
  out["max_error"] = rep.max_error;
  out["worst_path"] = rep.worst_path;
  out["tolerance"] = rep.tolerance;
  out["passed"] = rep.passed;
  detail::write_file(dir / "summary.json", out.dump(2) + "\n");
  std::string csv = "path,sup_error\n";
  for (std::size_t i = 0; i < rep.per_path_error.size(); ++i) {
    detail::append_row(csv, {std::to_string(i), detail::fmt(rep.per_path_error[i])});
  }
  detail::write_file(dir / "paths.csv", csv);
}

/// Path dumps for plotting: paths.csv (t, M, S, V, H), extrema.csv
/// (t, M, S, M/S, Q, L, R) and ay.csv (t, M, S, Y, Ymax, B, stopped), one
/// block of rows per path. M follows cfg.path_process.
inline void emit_simulation(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  detail::ensure_directory(dir);
  const Potential pot = cfg.make_potential();
  const bool mixture = cfg.path_process == "mixture";

  std::string paths = "path,t,M,S,V,H\n";
  std::string extrema = "path,t,M,S,M_over_S,Q,L,R\n";
  std::string ay_csv = "path,t,M,S,Y,Ymax,B,stopped\n";
  detail::KahanSum final_log_s;
  for (std::uint64_t i = 0; i < cfg.n_paths; ++i) {
    PathRng rng(path_seed(cfg.master_seed, i));
    PathState st = start_path(path_seed(cfg.master_seed, i));
    ExtremaState ex;
    AYState ay = ay_start(pot);
    if (pot.distribution()) ay_stop_rule(ay, *pot.distribution(), 1.0);
    double m = 1.0;
    double s = 1.0;
    const auto emit = [&](std::uint64_t t) {
      const std::string p = std::to_string(i);
      const std::string ts = std::to_string(t);
      detail::append_row(paths, {p, ts, detail::fmt(m), detail::fmt(s), detail::fmt(st.v),
                                 detail::fmt(h_value(m))});
      detail::append_row(extrema, {p, ts, detail::fmt(m), detail::fmt(s), detail::fmt(m / s),
                                   detail::fmt(ex.Q()), detail::fmt(ex.L()), detail::fmt(ex.r)});
      detail::append_row(ay_csv, {p, ts, detail::fmt(m), detail::fmt(s), detail::fmt(ay.y),
                                  detail::fmt(ay.y_max), detail::fmt(ay.b), ay.stopped ? "1" : "0"});
    };
    emit(0);
    for (std::uint64_t t = 1; t <= cfg.horizon; ++t) {
      const double z = rng.normal();
      st = mixture ? step_mixture(st, cfg.mixture, z) : step_gaussian_exp(st, cfg.lambda, z);
      const double m_new = st.m();
      const double s_new = st.s();
      ex = update_extrema(ex, m, s, m_new, s_new);
      ay = ay_step(ay, pot, m_new, s_new, m, s);
      if (pot.distribution()) ay_stop_rule(ay, *pot.distribution(), s_new);
      m = m_new;
      s = s_new;
      emit(t);
    }
    final_log_s += st.log_s;
  }
  detail::write_file(dir / "paths.csv", paths);
  detail::write_file(dir / "extrema.csv", extrema);
  detail::write_file(dir / "ay.csv", ay_csv);

  json summary = detail::report_header("simulate", cfg);
  summary["mean_log_S_T"] = cfg.n_paths == 0 ? 0.0 : final_log_s.value() / static_cast<double>(cfg.n_paths);
  summary["files"] = {"paths.csv", "extrema.csv", "ay.csv"};
  detail::write_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace peekstat
