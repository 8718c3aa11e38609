#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "peekstat/detail/numeric.hpp"
#include "peekstat/error.hpp"

namespace peekstat {

enum class DistKind { Uniform01, Pareto, Exponential, Empirical };

/// One-dimensional null law. Continuous kinds are parametrised in closed form,
/// the empirical kind carries its sorted sample.
///
/// Conventions: ccdf(x) = P(X >= x) (left-continuous), and the tail quantile is
/// the infimum of {x : ccdf(x) < xi}.
class DistributionModel {
 public:
  static DistributionModel uniform01() { return DistributionModel(DistKind::Uniform01, 0.0, {}); }

  /// Pareto with unit scale: P(X >= x) = x^(-alpha) for x >= 1.
  static DistributionModel pareto(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      throw DomainError("pareto: alpha must be a positive finite number");
    }
    return DistributionModel(DistKind::Pareto, alpha, {});
  }

  static DistributionModel exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
      throw DomainError("exponential: rate must be a positive finite number");
    }
    return DistributionModel(DistKind::Exponential, rate, {});
  }

  static DistributionModel empirical(std::vector<double> sample) {
    if (sample.empty()) throw DomainError("empirical: sample must be nonempty");
    for (double x : sample) {
      if (!std::isfinite(x)) throw DomainError("empirical: sample values must be finite");
    }
    std::sort(sample.begin(), sample.end());
    return DistributionModel(DistKind::Empirical, 0.0, std::move(sample));
  }

  DistKind kind() const { return kind_; }
  double alpha() const { return param_; }
  double rate() const { return param_; }
  std::span<const double> sample() const { return sample_; }

  double support_min() const {
    switch (kind_) {
      case DistKind::Uniform01:
      case DistKind::Exponential:
        return 0.0;
      case DistKind::Pareto:
        return 1.0;
      case DistKind::Empirical:
        return sample_.front();
    }
    return 0.0;
  }

  double support_max() const {
    switch (kind_) {
      case DistKind::Uniform01:
        return 1.0;
      case DistKind::Pareto:
      case DistKind::Exponential:
        return std::numeric_limits<double>::infinity();
      case DistKind::Empirical:
        return sample_.back();
    }
    return 0.0;
  }

  bool operator==(const DistributionModel&) const = default;

 private:
  DistributionModel(DistKind kind, double param, std::vector<double> sample)
      : kind_(kind), param_(param), sample_(std::move(sample)) {}

  DistKind kind_;
  double param_;
  std::vector<double> sample_;
};

inline std::string to_string(DistKind k) {
  switch (k) {
    case DistKind::Uniform01:
      return "uniform01";
    case DistKind::Pareto:
      return "pareto";
    case DistKind::Exponential:
      return "exponential";
    case DistKind::Empirical:
      return "empirical";
  }
  return "?";
}

namespace detail {

inline void require_prob(double xi, const char* what) {
  if (!(xi > 0.0 && xi <= 1.0)) {
    throw DomainError(std::string(what) + ": probability must lie in (0, 1]");
  }
}

inline void require_integrable(const DistributionModel& mu, const char* what) {
  if (mu.kind() == DistKind::Pareto && mu.alpha() <= 1.0) {
    throw NonintegrableTail(std::string(what) +
                            ": Pareto tail with alpha <= 1 has infinite mean");
  }
}

// xi * n, snapped to the nearest integer when within rounding of it, so that
// breakpoints k/n land on k.
inline double scaled_rank(double xi, std::size_t n) {
  const double w = xi * static_cast<double>(n);
  const double r = std::round(w);
  return std::abs(w - r) <= 1e-9 * std::max(1.0, w) ? r : w;
}

// k-th largest element (1-based) of an ascending sample.
inline double kth_largest(std::span<const double> s, std::size_t k) {
  return s[s.size() - k];
}

}  // namespace detail

/// P(X >= x).
inline double ccdf(const DistributionModel& mu, double x) {
  switch (mu.kind()) {
    case DistKind::Uniform01:
      if (x <= 0.0) return 1.0;
      if (x >= 1.0) return 0.0;
      return 1.0 - x;
    case DistKind::Pareto:
      if (x <= 1.0) return 1.0;
      return std::pow(x, -mu.alpha());
    case DistKind::Exponential:
      if (x <= 0.0) return 1.0;
      return std::exp(-mu.rate() * x);
    case DistKind::Empirical: {
      const auto s = mu.sample();
      const auto it = std::lower_bound(s.begin(), s.end(), x);
      return static_cast<double>(s.end() - it) / static_cast<double>(s.size());
    }
  }
  return 0.0;
}

/// inf{x : P(X >= x) < xi} for xi in (0, 1]. For an empirical law this is the
/// ceil(xi * n)-th largest observation, so xi = k/n gives the k-th largest.
inline double tail_quantile(const DistributionModel& mu, double xi) {
  detail::require_prob(xi, "tail_quantile");
  switch (mu.kind()) {
    case DistKind::Uniform01:
      return 1.0 - xi;
    case DistKind::Pareto:
      return std::pow(xi, -1.0 / mu.alpha());
    case DistKind::Exponential:
      return -std::log(xi) / mu.rate();
    case DistKind::Empirical: {
      const auto s = mu.sample();
      const double w = detail::scaled_rank(xi, s.size());
      auto k = static_cast<std::size_t>(std::ceil(w));
      k = std::clamp<std::size_t>(k, 1, s.size());
      return detail::kth_largest(s, k);
    }
  }
  return 0.0;
}

inline double mean(const DistributionModel& mu) {
  detail::require_integrable(mu, "mean");
  switch (mu.kind()) {
    case DistKind::Uniform01:
      return 0.5;
    case DistKind::Pareto:
      return mu.alpha() / (mu.alpha() - 1.0);
    case DistKind::Exponential:
      return 1.0 / mu.rate();
    case DistKind::Empirical: {
      const auto s = mu.sample();
      detail::KahanSum acc;
      for (double x : s) acc += x;
      return acc.value() / static_cast<double>(s.size());
    }
  }
  return 0.0;
}

/// E[X | X >= x].
inline double barycenter(const DistributionModel& mu, double x) {
  if (ccdf(mu, x) <= 0.0) {
    throw EmptyConditioning("barycenter: P(X >= x) = 0");
  }
  detail::require_integrable(mu, "barycenter");
  switch (mu.kind()) {
    case DistKind::Uniform01:
      return x <= 0.0 ? 0.5 : 0.5 * (1.0 + x);
    case DistKind::Pareto: {
      const double a = mu.alpha();
      return a / (a - 1.0) * std::max(x, 1.0);
    }
    case DistKind::Exponential:
      return std::max(x, 0.0) + 1.0 / mu.rate();
    case DistKind::Empirical: {
      const auto s = mu.sample();
      const auto it = std::lower_bound(s.begin(), s.end(), x);
      detail::KahanSum acc;
      for (auto p = it; p != s.end(); ++p) acc += *p;
      return acc.value() / static_cast<double>(s.end() - it);
    }
  }
  return 0.0;
}

/// (1/xi) * integral over (0, xi] of the tail quantile. Closed form for every
/// kind; for an empirical law this is the average of the top xi*n order
/// statistics with a fractional weight on the boundary atom.
inline double superquantile(const DistributionModel& mu, double xi) {
  detail::require_prob(xi, "superquantile");
  detail::require_integrable(mu, "superquantile");
  switch (mu.kind()) {
    case DistKind::Uniform01:
      return 1.0 - 0.5 * xi;
    case DistKind::Pareto: {
      const double a = mu.alpha();
      return a / (a - 1.0) * std::pow(xi, -1.0 / a);
    }
    case DistKind::Exponential:
      return (1.0 - std::log(xi)) / mu.rate();
    case DistKind::Empirical: {
      const auto s = mu.sample();
      const double w = detail::scaled_rank(xi, s.size());
      const auto whole = static_cast<std::size_t>(std::floor(w));
      detail::KahanSum acc;
      for (std::size_t k = 1; k <= whole; ++k) acc += detail::kth_largest(s, k);
      const double frac = w - static_cast<double>(whole);
      if (frac > 0.0 && whole < s.size()) {
        acc += frac * detail::kth_largest(s, whole + 1);
      }
      return acc.value() / w;
    }
  }
  return 0.0;
}

/// One draw of the Hardy-Littlewood transform: SQ(u) for a uniform u.
inline double hl_sample(const DistributionModel& mu, double u) {
  return superquantile(mu, u);
}

/// P(SQ(U) >= y), by inverting the nonincreasing superquantile.
inline double hl_ccdf(const DistributionModel& mu, double y) {
  detail::require_integrable(mu, "hl_ccdf");
  switch (mu.kind()) {
    case DistKind::Uniform01:
      if (y <= 0.5) return 1.0;
      if (y >= 1.0) return 0.0;
      return 2.0 * (1.0 - y);
    case DistKind::Pareto: {
      const double m = mu.alpha() / (mu.alpha() - 1.0);
      if (y <= m) return 1.0;
      return std::pow(m / y, mu.alpha());
    }
    case DistKind::Exponential:
      if (y <= 1.0 / mu.rate()) return 1.0;
      return std::exp(1.0 - mu.rate() * y);
    case DistKind::Empirical: {
      if (superquantile(mu, 1.0) >= y) return 1.0;
      if (y > mu.support_max()) return 0.0;
      return detail::bisect_last_true(
          [&](double u) { return superquantile(mu, u) >= y; }, 0.0, 1.0);
    }
  }
  return 0.0;
}

/// E[(X - k)^+].
inline double expected_excess(const DistributionModel& mu, double k) {
  detail::require_integrable(mu, "expected_excess");
  switch (mu.kind()) {
    case DistKind::Uniform01:
      if (k <= 0.0) return 0.5 - k;
      if (k >= 1.0) return 0.0;
      return 0.5 * (1.0 - k) * (1.0 - k);
    case DistKind::Pareto: {
      const double a = mu.alpha();
      if (k <= 1.0) return a / (a - 1.0) - k;
      return std::pow(k, 1.0 - a) / (a - 1.0);
    }
    case DistKind::Exponential:
      if (k <= 0.0) return 1.0 / mu.rate() - k;
      return std::exp(-mu.rate() * k) / mu.rate();
    case DistKind::Empirical: {
      const auto s = mu.sample();
      const auto it = std::upper_bound(s.begin(), s.end(), k);
      detail::KahanSum acc;
      for (auto p = it; p != s.end(); ++p) acc += *p - k;
      return acc.value() / static_cast<double>(s.size());
    }
  }
  return 0.0;
}

/// HL tail probability via min over z > 0 of E[(X - (y - z))^+] / z.
/// The minimisation scans a log-spaced grid on [1e-6, 1e6] and then refines the
/// best bracket by golden-section search. Result is clipped to [0, 1].
inline double hl_ccdf_variational(const DistributionModel& mu, double y,
                                  std::size_t grid_points = 512) {
  if (grid_points < 3) throw DomainError("hl_ccdf_variational: grid too coarse");
  const auto objective = [&](double z) { return expected_excess(mu, y - z) / z; };
  const double lo = std::log(1e-6);
  const double hi = std::log(1e6);
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double v = objective(std::exp(lo + step * static_cast<double>(i)));
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  const double a = std::exp(lo + step * static_cast<double>(best == 0 ? 0 : best - 1));
  const double b = std::exp(lo + step * static_cast<double>(std::min(best + 1, grid_points - 1)));
  const auto refined = detail::golden_section(objective, a, b);
  const double value = std::min(best_value, refined.value);
  return std::clamp(value, 0.0, 1.0);
}

/// g^mu(x) = tail_quantile(1/x), x >= 1.
inline double g_mu(const DistributionModel& mu, double x) {
  if (!(x >= 1.0)) throw DomainError("g_mu: argument must be >= 1");
  return tail_quantile(mu, 1.0 / x);
}

/// Future loss potential G^mu(x) = SQ(1/x), x >= 1.
inline double G_mu(const DistributionModel& mu, double x) {
  if (!(x >= 1.0)) throw DomainError("G_mu: argument must be >= 1");
  return superquantile(mu, 1.0 / x);
}

}  // namespace peekstat
