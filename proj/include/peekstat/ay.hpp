#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "peekstat/detail/numeric.hpp"
#include "peekstat/distribution.hpp"
#include "peekstat/dominance.hpp"
#include "peekstat/error.hpp"
#include "peekstat/potential.hpp"

namespace peekstat {

/// Bregman divergence of the convex function -G:
/// D(a, b) = -G(a) + G(b) + (a - b) G'(b) >= 0.
inline double bregman_neg_G(const Potential& p, double a, double b) {
  if (a == b) return 0.0;
  return -p.G(a) + p.G(b) + (a - b) * p.Gprime(b);
}

/// Per-path Azema-Yor state.
///   Y     = g(S) + M G'(S)                (AY process)
///   y_max = max_{s <= t} Y_s = G(S_t)
///   B     = Y + sum_s D_{-G}(S_s, S_{s-1})  (Bachelier process)
struct AYState {
  std::uint64_t t = 0;
  double y = 0.0;
  double y_max = 0.0;
  double b = 0.0;
  detail::KahanSum bregman_sum;
  bool stopped = false;
  std::optional<std::uint64_t> stop_time;
};

/// State at t = 0, where M_0 = S_0 = 1 so Y_0 = B_0 = G(1).
inline AYState ay_start(const Potential& p) {
  AYState st;
  st.y = p.G(1.0);
  st.y_max = st.y;
  st.b = st.y;
  return st;
}

/// AY value at (M, S). Evaluated as g(S) + M G'(S) and kept inside the
/// bracket [g(S), G(S)] it provably lies in; at a record (M == S) it is G(S)
/// exactly, so the running max of Y reproduces G(S_t) bit for bit.
inline double ay_value(const Potential& p, double m, double s) {
  const double G = p.G(s);
  if (m == s) return G;
  const double g = p.g(s);
  return std::clamp(g + m * p.Gprime(s), g, G);
}

inline AYState ay_step(AYState st, const Potential& p, double m_new, double s_new,
                       double m_prev, double s_prev) {
  if (s_new < s_prev) throw InvalidPath("ay_step: running max decreased");
  if (m_new < 0.0 || m_new > s_new || m_prev > s_prev) {
    throw InvalidPath("ay_step: need 0 <= M <= S");
  }
  st.t += 1;
  st.y = ay_value(p, m_new, s_new);
  st.y_max = std::max(st.y_max, st.y);
  if (s_new != s_prev) st.bregman_sum += bregman_neg_G(p, s_new, s_prev);
  st.b = st.y + st.bregman_sum.value();
  return st;
}

/// The four algebraically equal expressions for Y at (M, S):
///   (a) (1 - M/S) g(S) + M * integral_S^inf g(x)/x^2 dx
///   (b) (1 - M/S) g(S) + (M/S) G(S)
///   (c) G(S) - (S - M) G'(S)
///   (d) g(S) + M G'(S)
/// (a) and (b) always integrate g numerically; (c) and (d) use the
/// potential's own mode.
struct AYForms {
  double a;
  double b;
  double c;
  double d;

  double max_deviation() const {
    const double hi = std::max({a, b, c, d});
    const double lo = std::min({a, b, c, d});
    return hi - lo;
  }
};

inline AYForms ay_forms(const Potential& p, double m, double s) {
  const double gs = p.g(s);
  const double Gq = p.G_quadrature(s);
  const double ratio = m / s;
  AYForms f;
  f.a = (1.0 - ratio) * gs + m * (Gq / s);
  f.b = (1.0 - ratio) * gs + ratio * Gq;
  const double Gp = p.Gprime(s);
  f.c = p.G(s) - (s - m) * Gp;
  f.d = gs + m * Gp;
  return f;
}

/// Stop rule for the mu-calibrated test: stop at the first t with
/// g^mu(S_t) >= Y_t. Returns the flag and latches it into the state.
inline bool ay_stop_rule(AYState& st, const DistributionModel& mu, double s) {
  if (st.stopped) return true;
  if (g_mu(mu, s) >= st.y) {
    st.stopped = true;
    st.stop_time = st.t;
  }
  return st.stopped;
}

enum class StoppedMaxStatus { Passed, Failed, RejectedPrecondition };

struct StoppedMaxReport {
  StoppedMaxStatus status = StoppedMaxStatus::RejectedPrecondition;
  DominanceReport precondition;       // A_tau dominated by mu
  std::optional<DominanceReport> main;  // running max dominated by mu^HL
};

/// Checks max_{s <= tau} A_s against mu^HL, after confirming empirically that
/// the stopped values satisfy A_tau <= mu in first order.
inline StoppedMaxReport stopped_max_dominance_check(std::span<const double> stopped_values,
                                                    std::span<const double> running_max,
                                                    const DistributionModel& mu,
                                                    double delta = 0.01) {
  StoppedMaxReport rep;
  rep.precondition = check_dominance_against(
      stopped_values, [&](double c) { return ccdf(mu, c); }, Side::ReferenceDominates, delta);
  if (!rep.precondition.holds()) {
    rep.status = StoppedMaxStatus::RejectedPrecondition;
    return rep;
  }
  rep.main = check_dominance_against(
      running_max, [&](double c) { return hl_ccdf(mu, c); }, Side::ReferenceDominates, delta);
  rep.status = rep.main->holds() ? StoppedMaxStatus::Passed : StoppedMaxStatus::Failed;
  return rep;
}

struct MMPath {
  std::vector<double> m;
  std::vector<double> s;
};

/// Martingale-max decomposition: recovers the variation process M and its
/// running max S from B, given B_0 = G(1), by
///   M_t = M_{t-1} + (B_t - B_{t-1}) / G'(S_{t-1}),  S_t = max(S_{t-1}, M_t).
inline MMPath mm_decompose(std::span<const double> b, const Potential& p) {
  if (b.empty()) throw InitialConditionError("mm_decompose: empty path");
  const double g1 = p.G(1.0);
  if (std::abs(b[0] - g1) > 1e-12 * std::max(1.0, std::abs(g1))) {
    throw InitialConditionError("mm_decompose: B_0 must equal G(1)");
  }
  MMPath out;
  out.m.reserve(b.size());
  out.s.reserve(b.size());
  out.m.push_back(1.0);
  out.s.push_back(1.0);
  for (std::size_t t = 1; t < b.size(); ++t) {
    const double slope = p.Gprime(out.s.back());
    if (!(slope >= 1e-300)) {
      throw DegeneratePotential("mm_decompose: G' vanishes at the running max");
    }
    const double m = out.m.back() + (b[t] - b[t - 1]) / slope;
    out.m.push_back(m);
    out.s.push_back(std::max(out.s.back(), m));
  }
  return out;
}

/// Lower process of the max-plus decomposition, G(M) - M G'(M).
inline double maxplus_lower(const Potential& p, double m) {
  if (m <= 0.0) return p.G(0.0);
  return p.G(m) - m * p.Gprime(m);
}

/// E[g(S_inf)] = g(1) + G'(1) for a martingale M.
inline double expected_ultimate_max(const Potential& p) { return p.g(1.0) + p.Gprime(1.0); }

struct LogMaxCheck {
  bool holds = true;
  std::optional<std::size_t> offending_step;
  double min_gap = 0.0;  // min over t of log S_t - L_t
  double max_gap = 0.0;
};

/// Pathwise check of log S_t >= L_t (equivalently log S_t + M_t/S_t >= 1 + Q_t)
/// along one path M_0 = 1, M_1, ... . `tol` absorbs rounding.
inline LogMaxCheck q_logmax_bound_check(std::span<const double> m, double tol = 1e-12) {
  if (m.empty() || m[0] != 1.0) throw InvalidPath("q_logmax_bound_check: path must start at 1");
  LogMaxCheck out;
  detail::KahanSum l;
  double s = 1.0;
  out.min_gap = 0.0;
  out.max_gap = 0.0;
  for (std::size_t t = 1; t < m.size(); ++t) {
    const double s_new = std::max(s, m[t]);
    if (s_new != s) l += m[t - 1] * (1.0 / s - 1.0 / s_new);
    s = s_new;
    const double gap = std::log(s) - l.value();
    out.min_gap = std::min(out.min_gap, gap);
    out.max_gap = std::max(out.max_gap, gap);
    if (gap < -tol && out.holds) {
      out.holds = false;
      out.offending_step = t;
    }
  }
  return out;
}

}  // namespace peekstat
