#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "peekstat/detail/numeric.hpp"
#include "peekstat/error.hpp"

namespace peekstat {

/// Live state of one test-martingale path. M and its running maximum S are kept
/// as logarithms so long horizons neither underflow nor overflow.
struct PathState {
  std::uint64_t t = 0;
  double log_m = 0.0;
  double log_s = 0.0;
  double v = 0.0;      // cumulative variance
  double z_sum = 0.0;  // running sum of raw increments
  std::uint64_t rng_seed = 0;

  double m() const { return std::exp(log_m); }
  double s() const { return std::exp(log_s); }
};

inline PathState start_path(std::uint64_t seed = 0) {
  PathState p;
  p.rng_seed = seed;
  return p;
}

namespace detail {

inline PathState advance(PathState state, double log_m, double z, double var) {
  state.t += 1;
  state.log_m = log_m;
  state.log_s = std::max(state.log_s, log_m);
  state.z_sum += z;
  state.v += var;
  return state;
}

}  // namespace detail

/// M <- M * exp(lambda z - lambda^2 / 2) for a standard normal draw z.
inline PathState step_gaussian_exp(PathState state, double lambda, double z) {
  if (lambda == 0.0) throw DomainError("step_gaussian_exp: lambda must be nonzero");
  const double log_m = state.log_m + lambda * z - 0.5 * lambda * lambda;
  return detail::advance(state, log_m, z, 1.0);
}

/// Optimised Chernoff bound for the Gaussian sum at a fixed time:
/// min over lambda of exp(-lambda Z + lambda^2 t / 2) = exp(-Z^2 / 2t).
inline double fixed_time_pvalue(double z_sum, std::uint64_t t) {
  if (t == 0) throw DomainError("fixed_time_pvalue: t must be >= 1");
  return std::exp(-z_sum * z_sum / (2.0 * static_cast<double>(t)));
}

/// Classical two-sided z-test p-value P(|N(0,1)| >= |Z| / sqrt(t)). Exact at a
/// fixed time, which is what makes it the "naive" choice for a peeker.
inline double ztest_pvalue(double z_sum, std::uint64_t t) {
  if (t == 0) throw DomainError("ztest_pvalue: t must be >= 1");
  return std::erfc(std::abs(z_sum) / std::sqrt(2.0 * static_cast<double>(t)));
}

/// Discrete mixing law over lambda > 0.
struct MixtureGrid {
  std::vector<double> lambdas;
  std::vector<double> weights;

  void validate() const {
    if (lambdas.empty() || lambdas.size() != weights.size()) {
      throw DomainError("MixtureGrid: lambdas and weights must be nonempty and equal length");
    }
    detail::KahanSum total;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      if (!(lambdas[i] > 0.0) || !std::isfinite(lambdas[i])) {
        throw DomainError("MixtureGrid: lambdas must be positive and finite");
      }
      if (!(weights[i] > 0.0)) throw DomainError("MixtureGrid: weights must be positive");
      total += weights[i];
    }
    if (std::abs(total.value() - 1.0) > 1e-12) {
      throw DomainError("MixtureGrid: weights must sum to 1");
    }
  }

  /// lambda_k = lambda_max * eta^(-k - 1/2), k < count, with weights
  /// proportional to 1 / (lambda_k * ln^s(e * lambda_max / lambda_k)).
  static MixtureGrid geometric(double eta = 1.1, double lambda_max = 4.0,
                               std::size_t count = 100, double s = 1.4) {
    if (!(eta > 1.0) || !(lambda_max > 0.0) || count == 0 || !(s > 1.0)) {
      throw DomainError("MixtureGrid::geometric: need eta > 1, lambda_max > 0, count >= 1, s > 1");
    }
    MixtureGrid g;
    g.lambdas.reserve(count);
    g.weights.reserve(count);
    detail::KahanSum total;
    for (std::size_t k = 0; k < count; ++k) {
      const double lam = lambda_max * std::pow(eta, -static_cast<double>(k) - 0.5);
      const double w = 1.0 / (lam * std::pow(std::log(std::exp(1.0) * lambda_max / lam), s));
      g.lambdas.push_back(lam);
      g.weights.push_back(w);
      total += w;
    }
    for (double& w : g.weights) w /= total.value();
    return g;
  }
};

/// log of W = sum_k w_k exp(lambda_k Z - lambda_k^2 V / 2), by log-sum-exp.
inline double mixture_log_value(const MixtureGrid& grid, double z_sum, double v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.lambdas.size(); ++k) {
    const double lam = grid.lambdas[k];
    hi = std::max(hi, std::log(grid.weights[k]) + lam * z_sum - 0.5 * lam * lam * v);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.lambdas.size(); ++k) {
    const double lam = grid.lambdas[k];
    acc += std::exp(std::log(grid.weights[k]) + lam * z_sum - 0.5 * lam * lam * v - hi);
  }
  return hi + std::log(acc);
}

/// Sub-Gaussian mixture step: Z += z, V += sigma2, M = W(Z, V). W is a
/// nonnegative supermartingale started at 1 whenever z has conditional mean
/// <= 0 and is sigma2-sub-Gaussian.
inline PathState step_mixture(PathState state, const MixtureGrid& grid, double z,
                              double sigma2 = 1.0) {
  if (!(sigma2 > 0.0)) throw DomainError("step_mixture: sigma2 must be positive");
  const double z_sum = state.z_sum + z;
  const double v = state.v + sigma2;
  const double log_w = mixture_log_value(grid, z_sum, v);
  state.t += 1;
  state.z_sum = z_sum;
  state.v = v;
  state.log_m = log_w;
  state.log_s = std::max(state.log_s, log_w);
  return state;
}

/// H = 1 / W. Returns +infinity for W = 0.
inline double h_value(double w) {
  if (w < 0.0) throw DomainError("h_value: W must be nonnegative");
  if (w == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / w;
}

inline double h_value_from_log(double log_w) { return std::exp(-log_w); }

/// Likelihood-ratio factor f(X)/g(X) for an observation drawn from g.
inline PathState step_likelihood_ratio(PathState state, double f_density, double g_density) {
  if (!(g_density > 0.0)) throw DomainError("step_likelihood_ratio: g density must be positive");
  if (f_density < 0.0) throw DomainError("step_likelihood_ratio: f density must be nonnegative");
  const double log_m = state.log_m + std::log(f_density) - std::log(g_density);
  state.t += 1;
  state.log_m = log_m;
  state.log_s = std::max(state.log_s, log_m);
  return state;
}

/// Evaluates log W lazily. Exact evaluation costs one exp per grid atom, so
/// callers that only need W when it may beat a threshold (running maxima,
/// first crossings) ask `log_value_if_above`, which first tries two cheap
/// upper bounds and returns nothing when W provably stays at or below.
class MixtureEvaluator {
 public:
  explicit MixtureEvaluator(MixtureGrid grid, std::size_t block_size = 10)
      : grid_(std::move(grid)) {
    grid_.validate();
    lam_lo_ = *std::min_element(grid_.lambdas.begin(), grid_.lambdas.end());
    lam_hi_ = *std::max_element(grid_.lambdas.begin(), grid_.lambdas.end());
    log_w_.reserve(grid_.weights.size());
    for (double w : grid_.weights) log_w_.push_back(std::log(w));
    block_size = std::max<std::size_t>(block_size, 1);
    for (std::size_t start = 0; start < grid_.lambdas.size(); start += block_size) {
      const std::size_t end = std::min(start + block_size, grid_.lambdas.size());
      Block b;
      b.lo = std::numeric_limits<double>::infinity();
      b.hi = 0.0;
      detail::KahanSum w;
      for (std::size_t k = start; k < end; ++k) {
        b.lo = std::min(b.lo, grid_.lambdas[k]);
        b.hi = std::max(b.hi, grid_.lambdas[k]);
        w += grid_.weights[k];
      }
      b.log_weight = std::log(w.value());
      blocks_.push_back(b);
    }
  }

  const MixtureGrid& grid() const { return grid_; }

  double log_value(double z_sum, double v) const {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < log_w_.size(); ++k) {
      const double lam = grid_.lambdas[k];
      hi = std::max(hi, log_w_[k] + lam * z_sum - 0.5 * lam * lam * v);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < log_w_.size(); ++k) {
      const double lam = grid_.lambdas[k];
      acc += std::exp(log_w_[k] + lam * z_sum - 0.5 * lam * lam * v - hi);
    }
    return hi + std::log(acc);
  }

  /// max over lambda in [lam_lo, lam_hi] of lambda Z - lambda^2 V / 2.
  double log_upper_bound(double z_sum, double v) const {
    return peak(z_sum, v, lam_lo_, lam_hi_);
  }

  std::optional<double> log_value_if_above(double z_sum, double v,
                                           double log_threshold) const {
    const double cut = log_threshold - 1e-9 * std::max(1.0, std::abs(log_threshold));
    if (log_upper_bound(z_sum, v) < cut) return std::nullopt;
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& b : blocks_) hi = std::max(hi, b.log_weight + peak(z_sum, v, b.lo, b.hi));
    double acc = 0.0;
    for (const auto& b : blocks_) acc += std::exp(b.log_weight + peak(z_sum, v, b.lo, b.hi) - hi);
    if (hi + std::log(acc) < cut) return std::nullopt;
    return log_value(z_sum, v);
  }

 private:
  struct Block {
    double lo;
    double hi;
    double log_weight;
  };

  static double peak(double z, double v, double lo, double hi) {
    double lam;
    if (v <= 0.0) {
      lam = z > 0.0 ? hi : lo;
    } else {
      lam = std::clamp(z / v, lo, hi);
    }
    return lam * z - 0.5 * lam * lam * v;
  }

  MixtureGrid grid_;
  std::vector<double> log_w_;
  std::vector<Block> blocks_;
  double lam_lo_ = 0.0;
  double lam_hi_ = 0.0;
};

/// Fair +-step walk on the lattice step*{0, 1, 2, ...}, started at 1 and
/// absorbed at 0. A nonnegative martingale that never overshoots a lattice
/// level, which makes hitting probabilities exact.
class LatticeWalk {
 public:
  explicit LatticeWalk(double step) : step_(step) {
    if (!(step > 0.0) || !(step <= 1.0)) throw DomainError("LatticeWalk: step must lie in (0, 1]");
    const double units = 1.0 / step;
    if (std::abs(units - std::round(units)) > 1e-12) {
      throw DomainError("LatticeWalk: 1/step must be an integer");
    }
    position_ = static_cast<std::int64_t>(std::llround(units));
  }

  double m() const { return static_cast<double>(position_) * step_; }
  bool absorbed() const { return position_ == 0; }

  void step(bool up) {
    if (position_ == 0) return;
    position_ += up ? 1 : -1;
  }

 private:
  double step_;
  std::int64_t position_;
};

}  // namespace peekstat
