#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peekstat/detail/numeric.hpp"
#include "peekstat/distribution.hpp"
#include "peekstat/error.hpp"

namespace peekstat {

enum class PotentialKind { Log, Power, TailQuantileOf, UserTable };
enum class PotentialMode { ClosedForm, Quadrature };

struct PotentialValue {
  double g;
  double G;
  double Gprime;
};

namespace detail {

// Monotone piecewise-cubic Hermite interpolant (Fritsch-Butland slopes), held
// constant outside the knot range.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;

  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.empty() || x_.size() != y_.size()) {
      throw DomainError("table potential: need at least one (x, g) pair");
    }
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (!std::isfinite(x_[i]) || !std::isfinite(y_[i])) {
        throw DomainError("table potential: entries must be finite");
      }
      if (x_[i] <= 0.0) throw DomainError("table potential: x must be positive");
      if (i > 0 && !(x_[i] > x_[i - 1])) {
        throw DomainError("table potential: x must be strictly increasing");
      }
      if (i > 0 && y_[i] < y_[i - 1]) {
        throw DomainError("table potential: g must be nondecreasing");
      }
    }
    const std::size_t n = x_.size();
    slope_.assign(n, 0.0);
    if (n == 1) return;
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    slope_[0] = d[0];
    slope_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (d[i - 1] <= 0.0 || d[i] <= 0.0) continue;
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      const double w1 = 2.0 * h1 + h0;
      const double w2 = h1 + 2.0 * h0;
      slope_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }

  double operator()(double x) const {
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * slope_[i] +
           (-2 * t3 + 3 * t2) * y_[i + 1] + (t3 - t2) * h * slope_[i + 1];
  }

  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> slope_;
};

inline constexpr double kQuadratureSplit = 1e-6;
inline constexpr double kQuadratureTol = 1e-10;

}  // namespace detail

/// A nondecreasing g together with its future-loss potential
///
///   G(s)  = integral_0^1 g(s/u) du = s * integral_s^inf g(x)/x^2 dx
///   G'(s) = integral_s^inf (g(x) - g(s)) / x^2 dx
///
/// G is continuous, concave and nondecreasing, and g(s) = G(s) - s G'(s).
/// Potentials are immutable after construction; the integrability requirement
/// on g(x)/x^2 is checked there.
class Potential {
 public:
  static Potential log(PotentialMode mode = PotentialMode::ClosedForm) {
    return Potential(PotentialKind::Log, mode);
  }

  /// g(s) = s^a, 0 <= a < 1.
  static Potential power(double a, PotentialMode mode = PotentialMode::ClosedForm) {
    if (!(a >= 0.0 && a < 1.0)) {
      throw NonintegrableTail("power potential: exponent must lie in [0, 1)");
    }
    Potential p(PotentialKind::Power, mode);
    p.exponent_ = a;
    return p;
  }

  /// g = g^mu, i.e. g(s) = tail_quantile(mu, 1/s) for s >= 1. Below 1, g is
  /// held at g(1), the essential minimum of mu.
  static Potential tail_quantile_of(DistributionModel mu,
                                    PotentialMode mode = PotentialMode::ClosedForm) {
    // Throws NonintegrableTail for laws without a finite mean.
    const double g1 = tail_quantile(mu, 1.0);
    const double G1 = superquantile(mu, 1.0);
    Potential p(PotentialKind::TailQuantileOf, mode);
    p.mu_ = std::move(mu);
    p.g_at_one_ = g1;
    p.G_at_one_ = G1;
    return p;
  }

  /// g interpolated monotonically through (x, g(x)) pairs, constant outside.
  /// Only quadrature mode is available.
  static Potential table(std::vector<std::pair<double, double>> knots) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& [a, b] : knots) {
      x.push_back(a);
      y.push_back(b);
    }
    Potential p(PotentialKind::UserTable, PotentialMode::Quadrature);
    p.table_ = detail::MonotoneCubic(std::move(x), std::move(y));
    return p;
  }

  Potential with_mode(PotentialMode mode) const {
    if (mode == PotentialMode::ClosedForm && kind_ == PotentialKind::UserTable) {
      throw DomainError("table potential has no closed form");
    }
    Potential p = *this;
    p.mode_ = mode;
    return p;
  }

  PotentialKind kind() const { return kind_; }
  PotentialMode mode() const { return mode_; }
  double exponent() const { return exponent_; }
  const std::optional<DistributionModel>& distribution() const { return mu_; }
  const detail::MonotoneCubic& table_interpolant() const { return table_; }

  double g(double s) const {
    switch (kind_) {
      case PotentialKind::Log:
        return std::log(s);
      case PotentialKind::Power:
        return std::pow(s, exponent_);
      case PotentialKind::TailQuantileOf:
        return s <= 1.0 ? g_at_one_ : tail_quantile(*mu_, 1.0 / s);
      case PotentialKind::UserTable:
        return table_(s);
    }
    return 0.0;
  }

  double G(double s) const {
    if (!(s >= 0.0)) throw DomainError("potential: argument must be nonnegative");
    if (s == 0.0) return g(0.0);
    return mode_ == PotentialMode::ClosedForm ? G_closed(s) : G_quadrature(s);
  }

  double Gprime(double s) const {
    if (!(s > 0.0)) throw DomainError("potential: derivative needs a positive argument");
    return mode_ == PotentialMode::ClosedForm ? Gprime_closed(s) : Gprime_quadrature(s);
  }

  PotentialValue eval(double s) const { return {g(s), G(s), Gprime(s)}; }

  /// integral_s^inf g(x)/x^2 dx, the tail integral that form (a) of the AY
  /// process uses. Equals G(s)/s.
  double tail_integral(double s) const {
    if (!(s > 0.0)) throw DomainError("potential: tail integral needs a positive argument");
    return G(s) / s;
  }

  /// Quadrature evaluations regardless of mode (the reference route).
  double G_quadrature(double s) const {
    if (kind_ == PotentialKind::TailQuantileOf && s < 1.0) {
      return (1.0 - s) * g_at_one_ + s * G_quadrature(1.0);
    }
    const double eps = detail::kQuadratureSplit;
    const double body = detail::adaptive_simpson([&](double u) { return g(s / u); }, eps, 1.0,
                                                 detail::kQuadratureTol);
    return body + head_integral(s, false);
  }

  double Gprime_quadrature(double s) const {
    if (kind_ == PotentialKind::TailQuantileOf && s < 1.0) {
      return G_quadrature(1.0) - g_at_one_;
    }
    const double eps = detail::kQuadratureSplit;
    const double gs = g(s);
    const double body = detail::adaptive_simpson([&](double u) { return g(s / u) - gs; }, eps,
                                                 1.0, detail::kQuadratureTol);
    return (body + head_integral(s, true)) / s;
  }

 private:
  Potential(PotentialKind kind, PotentialMode mode) : kind_(kind), mode_(mode) {
    if (kind == PotentialKind::UserTable && mode == PotentialMode::ClosedForm) {
      throw DomainError("table potential has no closed form");
    }
  }

  double G_closed(double s) const {
    switch (kind_) {
      case PotentialKind::Log:
        return std::log(s) + 1.0;
      case PotentialKind::Power:
        return std::pow(s, exponent_) / (1.0 - exponent_);
      case PotentialKind::TailQuantileOf:
        if (s < 1.0) return (1.0 - s) * g_at_one_ + s * G_at_one_;
        return superquantile(*mu_, 1.0 / s);
      case PotentialKind::UserTable:
        break;
    }
    return G_quadrature(s);
  }

  double Gprime_closed(double s) const {
    switch (kind_) {
      case PotentialKind::Log:
        return 1.0 / s;
      case PotentialKind::Power:
        return exponent_ * std::pow(s, exponent_ - 1.0) / (1.0 - exponent_);
      case PotentialKind::TailQuantileOf: {
        if (s < 1.0) return G_at_one_ - g_at_one_;
        switch (mu_->kind()) {
          case DistKind::Uniform01:
            return 0.5 / (s * s);
          case DistKind::Pareto: {
            const double a = mu_->alpha();
            return std::pow(s, 1.0 / a - 1.0) / (a - 1.0);
          }
          case DistKind::Exponential:
            return 1.0 / (mu_->rate() * s);
          case DistKind::Empirical:
            return (G_closed(s) - g(s)) / s;
        }
        break;
      }
      case PotentialKind::UserTable:
        break;
    }
    return Gprime_quadrature(s);
  }

  // integral over u in (0, eps] of g(s/u) (minus g(s) when `centered`).
  double head_integral(double s, bool centered) const {
    const double eps = detail::kQuadratureSplit;
    const double shift = centered ? eps * g(s) : 0.0;
    switch (kind_) {
      case PotentialKind::Log:
        return eps * (std::log(s) - std::log(eps) + 1.0) - shift;
      case PotentialKind::Power: {
        const double a = exponent_;
        return std::pow(s, a) * std::pow(eps, 1.0 - a) / (1.0 - a) - shift;
      }
      case PotentialKind::TailQuantileOf:
      case PotentialKind::UserTable:
        break;
    }
    // u = eps * exp(-w) turns the endpoint singularity into exponential decay.
    constexpr double w_max = 60.0;
    const double gs = centered ? g(s) : 0.0;
    return detail::adaptive_simpson(
        [&](double w) {
          const double e = std::exp(-w);
          return eps * e * (g(s / (eps * e)) - gs);
        },
        0.0, w_max, detail::kQuadratureTol);
  }

  PotentialKind kind_;
  PotentialMode mode_;
  double exponent_ = 0.0;
  std::optional<DistributionModel> mu_;
  double g_at_one_ = 0.0;
  double G_at_one_ = 0.0;
  detail::MonotoneCubic table_;
};

inline PotentialValue potential_eval(const Potential& p, double s) { return p.eval(s); }

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::Log:
      return "log";
    case PotentialKind::Power:
      return "power";
    case PotentialKind::TailQuantileOf:
      return "tail_quantile_of";
    case PotentialKind::UserTable:
      return "table";
  }
  return "?";
}

}  // namespace peekstat
