#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace peekstat::detail {

// Compensated (Kahan-Babuska) running sum.
class KahanSum {
 public:
  KahanSum() = default;
  explicit KahanSum(double initial) : sum_(initial) {}

  KahanSum& operator+=(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

namespace simpson_impl {

template <class F>
double recurse(const F& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace simpson_impl

// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance `tol`.
// The interval is pre-split into `pieces` panels so that narrow features are
// not missed by the first estimate.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-10,
                        int max_depth = 48, int pieces = 8) {
  if (a == b) return 0.0;
  const double width = (b - a) / pieces;
  KahanSum total;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * width;
    const double hi = (i + 1 == pieces) ? b : a + (i + 1) * width;
    const double fa = f(lo);
    const double fb = f(hi);
    const double fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson_impl::recurse(f, lo, hi, fa, fm, fb, whole, tol / pieces,
                                   max_depth);
  }
  return total.value();
}

struct Minimum {
  double x;
  double value;
};

// Golden-section search for the minimum of a unimodal f on [a, b].
template <class F>
Minimum golden_section(const F& f, double a, double b, double tol = 1e-12,
                       int max_iter = 200) {
  constexpr double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol * (std::abs(c) + std::abs(d));
       ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? Minimum{c, fc} : Minimum{d, fd};
}

// Largest x in [lo, hi] with pred(x) true, assuming pred is true on a prefix.
template <class P>
double bisect_last_true(const P& pred, double lo, double hi,
                        int iterations = 200) {
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace peekstat::detail
