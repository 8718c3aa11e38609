#pragma once

// Monte Carlo studies shared by the invariant suite, the command-line tool and
// the acceptance runner. Every study is a pure function of its options: path i
// draws from path_seed(seed, i) only, so results do not depend on threading.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peekstat/ay.hpp"
#include "peekstat/detail/parallel.hpp"
#include "peekstat/distribution.hpp"
#include "peekstat/dominance.hpp"
#include "peekstat/error.hpp"
#include "peekstat/martingale.hpp"
#include "peekstat/potential.hpp"
#include "peekstat/random.hpp"

namespace peekstat {

/// Frequency estimate with its binomial standard error.
struct Proportion {
  std::size_t hits = 0;
  std::size_t n = 0;

  double rate() const { return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n); }
  double stderr_() const {
    if (n == 0) return 0.0;
    const double p = rate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  }
};

/// Sample mean with its standard error.
struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline MeanEstimate mean_estimate(std::span<const double> xs) {
  MeanEstimate out;
  out.n = xs.size();
  if (xs.empty()) return out;
  detail::KahanSum sum;
  for (double x : xs) sum += x;
  out.mean = sum.value() / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    detail::KahanSum sq;
    for (double x : xs) sq += (x - out.mean) * (x - out.mean);
    const double var = sq.value() / static_cast<double>(xs.size() - 1);
    out.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return out;
}

/// log S_T for n paths of the Gaussian exponential martingale.
inline std::vector<double> simulate_log_running_max(double lambda, std::uint64_t n_paths,
                                                    std::uint64_t horizon, std::uint64_t seed,
                                                    unsigned threads = 1) {
  std::vector<double> out(n_paths);
  detail::parallel_for(n_paths, threads, [&](std::uint64_t i) {
    PathRng rng(path_seed(seed, i));
    PathState st = start_path(path_seed(seed, i));
    for (std::uint64_t t = 0; t < horizon; ++t) st = step_gaussian_exp(st, lambda, rng.normal());
    out[i] = st.log_s;
  });
  return out;
}

/// Frequency of {max M >= 1/c} from a sample of log S_T.
inline Proportion ville_frequency(std::span<const double> log_s, double c) {
  if (!(c > 0.0 && c <= 1.0)) throw DomainError("ville_frequency: c must lie in (0, 1]");
  Proportion p;
  p.n = log_s.size();
  const double level = -std::log(c);
  for (double v : log_s) p.hits += v >= level ? 1 : 0;
  return p;
}

// ---------------------------------------------------------------------------
// The mu-calibrated stop rule.

enum class TauMuDriver { GaussianExp, Lattice };

struct TauMuOptions {
  TauMuDriver driver = TauMuDriver::GaussianExp;
  double lambda = 1.0;         // GaussianExp
  double lattice_step = 0.25;  // Lattice
  std::uint64_t n_paths = 10000;
  std::uint64_t horizon = 10000;
  std::uint64_t seed = 1;
  double delta = 0.01;
  unsigned threads = 1;
};

/// Y at the stop time and its running max, split into paths that stopped
/// within the horizon and all paths (censored ones contribute their values at
/// the horizon).
struct TauMuStudy {
  std::vector<double> y_stopped;
  std::vector<double> max_stopped;
  std::vector<double> y_all;
  std::vector<double> max_all;
  std::size_t n_censored = 0;
  double censor_rate = 0.0;
  std::optional<StoppedMaxReport> stopped_only;
  std::optional<StoppedMaxReport> with_censored;
};

inline TauMuStudy run_tau_mu_study(const DistributionModel& mu, const TauMuOptions& opt) {
  const Potential p = Potential::tail_quantile_of(mu);
  std::vector<double> y(opt.n_paths);
  std::vector<double> ymax(opt.n_paths);
  std::vector<char> stopped(opt.n_paths, 0);
  detail::parallel_for(opt.n_paths, opt.threads, [&](std::uint64_t i) {
    PathRng rng(path_seed(opt.seed, i));
    AYState st = ay_start(p);
    ay_stop_rule(st, mu, 1.0);
    if (opt.driver == TauMuDriver::GaussianExp) {
      PathState path = start_path();
      double m = 1.0;
      double s = 1.0;
      for (std::uint64_t t = 0; t < opt.horizon && !st.stopped; ++t) {
        path = step_gaussian_exp(path, opt.lambda, rng.normal());
        const double m_new = path.m();
        const double s_new = path.s();
        st = ay_step(st, p, m_new, s_new, m, s);
        m = m_new;
        s = s_new;
        ay_stop_rule(st, mu, s);
      }
    } else {
      LatticeWalk walk(opt.lattice_step);
      double m = walk.m();
      double s = m;
      for (std::uint64_t t = 0; t < opt.horizon && !st.stopped; ++t) {
        walk.step(rng.coin());
        const double m_new = walk.m();
        const double s_new = std::max(s, m_new);
        st = ay_step(st, p, m_new, s_new, m, s);
        m = m_new;
        s = s_new;
        ay_stop_rule(st, mu, s);
      }
    }
    y[i] = st.y;
    ymax[i] = st.y_max;
    stopped[i] = st.stopped ? 1 : 0;
  });

  TauMuStudy out;
  out.y_all = y;
  out.max_all = ymax;
  for (std::uint64_t i = 0; i < opt.n_paths; ++i) {
    if (stopped[i] != 0) {
      out.y_stopped.push_back(y[i]);
      out.max_stopped.push_back(ymax[i]);
    } else {
      ++out.n_censored;
    }
  }
  out.censor_rate = opt.n_paths == 0 ? 0.0
                                     : static_cast<double>(out.n_censored) /
                                           static_cast<double>(opt.n_paths);
  if (!out.y_stopped.empty()) {
    out.stopped_only = stopped_max_dominance_check(out.y_stopped, out.max_stopped, mu, opt.delta);
  }
  if (!out.y_all.empty()) {
    out.with_censored = stopped_max_dominance_check(out.y_all, out.max_all, mu, opt.delta);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stop rules with exactly known stopped laws, for the maximal inequality.

struct StopRuleCase {
  std::string name;
  DistributionModel mu;
  bool expect_rejection = false;  // the rule is not a stopping time
  std::size_t n_censored = 0;
  StoppedMaxReport report;
};

namespace detail {

// Lattice walk from 1, stopped when it leaves (lower, upper) or at horizon.
inline void lattice_exit(PathRng& rng, double step, double lower, double upper,
                         std::uint64_t horizon, double& a_tau, double& max_a, bool& censored) {
  LatticeWalk walk(step);
  double s = walk.m();
  std::uint64_t t = 0;
  while (walk.m() > lower && walk.m() < upper && t < horizon) {
    walk.step(rng.coin());
    s = std::max(s, walk.m());
    ++t;
  }
  a_tau = walk.m();
  max_a = s;
  censored = walk.m() > lower && walk.m() < upper;
}

inline DistributionModel two_point(double low, double high, std::size_t n_low, std::size_t n_high) {
  std::vector<double> v(n_low, low);
  v.insert(v.end(), n_high, high);
  return DistributionModel::empirical(std::move(v));
}

}  // namespace detail

inline std::vector<StopRuleCase> run_stop_rule_suite(std::uint64_t n_paths, std::uint64_t seed,
                                                     double delta = 0.01, unsigned threads = 1) {
  constexpr std::uint64_t lattice_horizon = 100000;
  std::vector<StopRuleCase> cases;

  const auto run_case = [&](std::string name, DistributionModel mu, bool adversarial,
                            std::uint64_t tag, auto&& draw) {
    std::vector<double> a(n_paths);
    std::vector<double> mx(n_paths);
    std::vector<char> cens(n_paths, 0);
    detail::parallel_for(n_paths, threads, [&](std::uint64_t i) {
      PathRng rng(path_seed(mix64(seed ^ tag), i));
      bool c = false;
      draw(rng, a[i], mx[i], c);
      cens[i] = c ? 1 : 0;
    });
    StopRuleCase sc{std::move(name), std::move(mu), adversarial, 0, {}};
    for (char c : cens) sc.n_censored += c != 0 ? 1 : 0;
    sc.report = stopped_max_dominance_check(a, mx, sc.mu, delta);
    cases.push_back(std::move(sc));
  };

  // Exit from (0, b) in steps of 1/4: A_tau is 0 or b, P(b) = 1/b.
  for (const int b : {2, 4}) {
    run_case("lattice_exit_0_" + std::to_string(b),
             detail::two_point(0.0, b, static_cast<std::size_t>(b - 1), 1), false,
             0x1000 + static_cast<std::uint64_t>(b),
             [&](PathRng& rng, double& a, double& mx, bool& c) {
               detail::lattice_exit(rng, 0.25, 0.0, b, lattice_horizon, a, mx, c);
             });
  }
  // Exit from (1/2, 2): P(A_tau = 2) = 1/3.
  run_case("lattice_exit_half_2", detail::two_point(0.5, 2.0, 2, 1), false, 0x2000,
           [&](PathRng& rng, double& a, double& mx, bool& c) {
             detail::lattice_exit(rng, 0.25, 0.5, 2.0, lattice_horizon, a, mx, c);
           });
  // Double or nothing three times: A_tau = 8 with probability 1/8.
  run_case("double_or_nothing_3", detail::two_point(0.0, 8.0, 7, 1), false, 0x3000,
           [&](PathRng& rng, double& a, double& mx, bool& c) {
             double m = 1.0;
             mx = 1.0;
             for (int k = 0; k < 3; ++k) {
               m = rng.coin() ? 2.0 * m : 0.0;
               mx = std::max(mx, m);
             }
             a = m;
             c = false;
           });
  // The mu-calibrated rule on a lattice walk, A = Y, mu = Uniform01.
  {
    const DistributionModel mu = DistributionModel::uniform01();
    const Potential pot = Potential::tail_quantile_of(mu);
    run_case("tau_mu_uniform01", mu, false, 0x4000,
             [&](PathRng& rng, double& a, double& mx, bool& c) {
               AYState st = ay_start(pot);
               LatticeWalk walk(0.25);
               double m = walk.m();
               double s = m;
               ay_stop_rule(st, mu, s);
               for (std::uint64_t t = 0; t < lattice_horizon && !st.stopped; ++t) {
                 walk.step(rng.coin());
                 const double s_new = std::max(s, walk.m());
                 st = ay_step(st, pot, walk.m(), s_new, m, s);
                 m = walk.m();
                 s = s_new;
                 ay_stop_rule(st, mu, s);
               }
               a = st.y;
               mx = st.y_max;
               c = !st.stopped;
             });
  }
  // Not a stopping time: report the running max at the argmax. Its law
  // already violates the precondition against the two-point law on {0, 2}.
  run_case("argmax_peeker", detail::two_point(0.0, 2.0, 1, 1), true, 0x5000,
           [&](PathRng& rng, double& a, double& mx, bool& c) {
             LatticeWalk walk(0.25);
             double s = walk.m();
             for (int t = 0; t < 64; ++t) {
               walk.step(rng.coin());
               s = std::max(s, walk.m());
             }
             a = s;
             mx = s;
             c = false;
           });
  return cases;
}

// ---------------------------------------------------------------------------
// Sampled versus variational Hardy-Littlewood tail.

struct HLCrossCheck {
  std::vector<double> grid;
  std::vector<double> sampled;
  std::vector<double> variational;
  double max_gap = 0.0;
  double worst_y = 0.0;
  double slack = 0.0;
  bool holds = true;
};

/// Draws SQ(U) n times, then compares the empirical P(HL >= y) with the
/// variational formula at `grid_points` sample quantiles of the draws.
inline HLCrossCheck run_hl_crosscheck(const DistributionModel& mu, std::size_t n_draws,
                                      std::size_t grid_points, std::uint64_t seed,
                                      double delta = 0.01) {
  if (n_draws == 0 || grid_points == 0) throw DomainError("run_hl_crosscheck: empty sample or grid");
  PathRng rng(seed);
  std::vector<double> draws(n_draws);
  for (auto& d : draws) d = hl_sample(mu, rng.uniform());
  std::sort(draws.begin(), draws.end());

  HLCrossCheck out;
  out.slack = dkw_band(n_draws, delta);
  for (std::size_t k = 0; k < grid_points; ++k) {
    const double level = (static_cast<double>(k) + 0.5) / static_cast<double>(grid_points);
    const auto idx = static_cast<std::size_t>(level * static_cast<double>(n_draws));
    const double y = draws[std::min(idx, n_draws - 1)];
    const auto lo = std::lower_bound(draws.begin(), draws.end(), y);
    const double emp = static_cast<double>(draws.end() - lo) / static_cast<double>(n_draws);
    const double var = hl_ccdf_variational(mu, y);
    out.grid.push_back(y);
    out.sampled.push_back(emp);
    out.variational.push_back(var);
    const double gap = std::abs(emp - var);
    if (gap > out.max_gap) {
      out.max_gap = gap;
      out.worst_y = y;
    }
  }
  out.holds = out.max_gap <= out.slack;
  return out;
}

}  // namespace peekstat
