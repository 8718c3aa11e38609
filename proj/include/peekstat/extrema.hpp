#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "peekstat/detail/numeric.hpp"
#include "peekstat/dominance.hpp"
#include "peekstat/error.hpp"
#include "peekstat/random.hpp"

namespace peekstat {

/// Running quantities of the multiplicative representation of a nonnegative
/// (super)martingale M with M_0 = 1 and running max S:
///
///   Q_t = sum_i (M_i - M_{i-1}) / S_i
///   L_t = sum_q M_{q-1} (1/S_{q-1} - 1/S_q)
///   R_t = min_{s <= t} M_s / S_s
///
/// so that M_t / S_t = 1 + Q_t - L_t exactly. Q and L are compensated sums.
struct ExtremaState {
  detail::KahanSum q;
  detail::KahanSum l;
  double r = 1.0;
  double azema_bound = 1.0;

  double Q() const { return q.value(); }
  double L() const { return l.value(); }
};

inline ExtremaState update_extrema(ExtremaState state, double m_prev, double s_prev,
                                   double m_new, double s_new) {
  if (!(s_prev > 0.0)) throw InvalidPath("update_extrema: S_prev must be positive");
  if (m_new < 0.0 || m_prev < 0.0) throw InvalidPath("update_extrema: M must be nonnegative");
  if (s_new != std::max(s_prev, m_new)) {
    throw InvalidPath("update_extrema: S_new must equal max(S_prev, M_new)");
  }
  state.q += (m_new - m_prev) / s_new;
  if (s_new != s_prev) state.l += m_prev * (1.0 / s_prev - 1.0 / s_new);
  state.azema_bound = m_new / s_new;
  state.r = std::min(state.r, state.azema_bound);
  return state;
}

/// M/S - (1 + Q - L); zero in exact arithmetic.
inline double extrema_identity_residual(const ExtremaState& state, double m, double s) {
  return m / s - (1.0 + (state.q.value() - state.l.value()));
}

/// Lookahead-maximum dominance: max_{s >= t} M_s is dominated by M_t / U.
/// Each row of `paths` is one trajectory M_0..M_T; rows shorter than `t + 1`
/// are rejected. The comparison sample uses one fresh uniform per path drawn
/// from `seed`.
inline DominanceReport lookahead_dominance_check(std::span<const std::vector<double>> paths,
                                                 std::size_t t, std::uint64_t seed,
                                                 double delta = 0.01) {
  if (paths.empty()) throw DomainError("lookahead_dominance_check: no paths");
  std::vector<double> bound;
  std::vector<double> lookahead;
  bound.reserve(paths.size());
  lookahead.reserve(paths.size());
  PathRng rng(seed);
  for (const auto& path : paths) {
    if (path.size() <= t) throw DomainError("lookahead_dominance_check: path shorter than t");
    const double u = rng.uniform();
    bound.push_back(path[t] / u);
    lookahead.push_back(*std::max_element(path.begin() + static_cast<std::ptrdiff_t>(t), path.end()));
  }
  return check_dominance(bound, lookahead, delta);
}

/// Tracks the last record time of a finite path as an estimate of
/// tau_F = max{s : M_s = S_s}, together with R at that time and the last time
/// R reached its minimum before it (the estimate of rho_F).
class FinalMaxTracker {
 public:
  /// Feed step t (t = 0 is the start, M_0 = S_0 = 1) in log scale.
  void observe(std::uint64_t t, double log_m, double log_s) {
    const double log_ratio = log_m - log_s;
    if (log_ratio <= log_r_) {
      log_r_ = log_ratio;
      argmin_r_ = t;
    }
    if (log_m >= log_s) {
      last_record_ = t;
      r_at_record_ = log_r_;
      argmin_at_record_ = argmin_r_;
    }
    last_log_ratio_ = log_ratio;
  }

  /// tau_F is resolved when the final M/S has decayed below `decay`, so that a
  /// later record has probability at most `decay` (Ville).
  bool resolved(double decay) const { return last_log_ratio_ < std::log(decay); }

  std::uint64_t tau_f() const { return last_record_; }
  std::uint64_t rho_f() const { return argmin_at_record_; }
  double r_at_tau_f() const { return std::exp(r_at_record_); }
  double log_r() const { return log_r_; }
  std::uint64_t argmin_r() const { return argmin_r_; }
  double final_ratio() const { return std::exp(last_log_ratio_); }

 private:
  double log_r_ = 0.0;
  std::uint64_t argmin_r_ = 0;
  std::uint64_t last_record_ = 0;
  double r_at_record_ = 0.0;
  std::uint64_t argmin_at_record_ = 0;
  double last_log_ratio_ = 0.0;
};

/// Empirical law of R at peeked times tau <= tau_F, with the validity verdict
/// ECDF(u) <= u + slack for every u.
struct RValidityReport {
  std::vector<double> sorted_r;  // the ECDF support
  std::size_t n_unresolved = 0;  // paths excluded because tau_F was not resolved
  double max_excess = 0.0;       // sup_u (ECDF(u) - u)
  double worst_u = 0.0;
  double slack = 0.0;
  bool valid = true;

  double ecdf(double u) const {
    if (sorted_r.empty()) return 0.0;
    const auto it = std::upper_bound(sorted_r.begin(), sorted_r.end(), u);
    return static_cast<double>(it - sorted_r.begin()) / static_cast<double>(sorted_r.size());
  }
};

inline RValidityReport r_statistic_validity(std::span<const double> r_values,
                                            std::size_t n_unresolved, double delta = 0.01) {
  if (r_values.empty()) throw DomainError("r_statistic_validity: no resolved paths");
  RValidityReport rep;
  rep.sorted_r.assign(r_values.begin(), r_values.end());
  std::sort(rep.sorted_r.begin(), rep.sorted_r.end());
  rep.n_unresolved = n_unresolved;
  rep.slack = dkw_band(rep.sorted_r.size(), delta);
  rep.max_excess = uniform_cdf_excess(rep.sorted_r, &rep.worst_u);
  rep.valid = rep.max_excess <= rep.slack;
  return rep;
}

}  // namespace peekstat
