#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <span>
#include <vector>

#include "peekstat/error.hpp"

namespace peekstat {

enum class Verdict { DominanceHolds, ViolatedBeyondSlack };

/// Empirical first-order dominance verdict. `max_violation` is the largest
/// amount by which the tail probability of the dominating side falls below that
/// of the dominated side, over every breakpoint; `worst_point` is where.
struct DominanceReport {
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  double max_violation = 0.0;
  double slack = 0.0;
  double worst_point = std::numeric_limits<double>::quiet_NaN();
  Verdict verdict = Verdict::DominanceHolds;

  bool holds() const { return verdict == Verdict::DominanceHolds; }
};

/// One-sample DKW half-width sqrt(ln(2/delta) / (2n)).
inline double dkw_band(std::size_t n, double delta) {
  if (n == 0) throw DomainError("dkw_band: empty sample");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("dkw_band: delta must lie in (0, 1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

namespace detail {

// Fractions of an ascending sample that are >= v and > v.
struct TailFractions {
  double at_least;
  double above;
};

inline TailFractions tail_fractions(std::span<const double> sorted, double v) {
  const auto n = static_cast<double>(sorted.size());
  const auto lo = std::lower_bound(sorted.begin(), sorted.end(), v);
  const auto hi = std::upper_bound(lo, sorted.end(), v);
  return {static_cast<double>(sorted.end() - lo) / n,
          static_cast<double>(sorted.end() - hi) / n};
}

inline std::vector<double> sorted_copy(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw DomainError(std::string(what) + ": empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  return v;
}

inline void finish(DominanceReport& r) {
  r.verdict = r.max_violation <= r.slack ? Verdict::DominanceHolds
                                         : Verdict::ViolatedBeyondSlack;
}

}  // namespace detail

/// Tests X >= Y in first order: P^(X >= c) >= P^(Y >= c) - slack at every
/// breakpoint c of the pooled sample. The slack is the sum of both one-sample
/// DKW bands at confidence delta.
inline DominanceReport check_dominance(std::span<const double> sample_x,
                                       std::span<const double> sample_y,
                                       double delta = 0.01) {
  const auto x = detail::sorted_copy(sample_x, "check_dominance");
  const auto y = detail::sorted_copy(sample_y, "check_dominance");
  DominanceReport r;
  r.n_x = x.size();
  r.n_y = y.size();
  r.slack = dkw_band(r.n_x, delta) + dkw_band(r.n_y, delta);

  const auto visit = [&](double c) {
    const auto fx = detail::tail_fractions(x, c);
    const auto fy = detail::tail_fractions(y, c);
    const double v = std::max(fy.at_least - fx.at_least, fy.above - fx.above);
    if (v > r.max_violation) {
      r.max_violation = v;
      r.worst_point = c;
    }
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i == 0 || x[i] != x[i - 1]) visit(x[i]);
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i == 0 || y[i] != y[i - 1]) visit(y[i]);
  }
  detail::finish(r);
  return r;
}

enum class Side {
  SampleDominates,     // sample >= reference
  ReferenceDominates,  // reference >= sample
};

/// One-sample dominance against an exact law given by its tail function
/// ref_ccdf(c) = P(X >= c). Only the sample's DKW band is charged; n_y = 0
/// marks the exact side.
inline DominanceReport check_dominance_against(
    std::span<const double> sample, const std::function<double(double)>& ref_ccdf,
    Side side, double delta = 0.01) {
  const auto s = detail::sorted_copy(sample, "check_dominance_against");
  DominanceReport r;
  r.n_x = s.size();
  r.n_y = 0;
  r.slack = dkw_band(s.size(), delta);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0 && s[i] == s[i - 1]) continue;
    const double c = s[i];
    const auto f = detail::tail_fractions(s, c);
    const double ref_at_least = ref_ccdf(c);
    const double ref_above = ref_ccdf(std::nextafter(c, inf));
    double v;
    if (side == Side::ReferenceDominates) {
      v = std::max(f.at_least - ref_at_least, f.above - ref_above);
    } else {
      v = std::max(ref_at_least - f.at_least, ref_above - f.above);
    }
    if (v > r.max_violation) {
      r.max_violation = v;
      r.worst_point = c;
    }
  }
  detail::finish(r);
  return r;
}

/// Largest excess of the empirical CDF P^(X <= u) over the uniform CDF u,
/// i.e. the amount by which a p-value sample fails to dominate U[0,1].
inline double uniform_cdf_excess(std::span<const double> sample, double* where = nullptr) {
  const auto s = detail::sorted_copy(sample, "uniform_cdf_excess");
  const auto n = static_cast<double>(s.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < s.size() && s[i + 1] == s[i]) continue;
    const double ecdf = static_cast<double>(i + 1) / n;
    const double excess = ecdf - std::clamp(s[i], 0.0, 1.0);
    if (excess > worst) {
      worst = excess;
      if (where != nullptr) *where = s[i];
    }
  }
  return worst;
}

}  // namespace peekstat
