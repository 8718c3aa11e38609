#include "peekstat/martingale.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "peekstat/random.hpp"
#include "peekstat/studies.hpp"

namespace {

using peekstat::MixtureGrid;
using peekstat::PathRng;
using peekstat::PathState;

constexpr std::uint64_t kPaths = 100000;

// Mean of a per-path statistic over kPaths independent paths.
template <class F>
peekstat::MeanEstimate monte_carlo(std::uint64_t seed, F&& per_path) {
  std::vector<double> xs(kPaths);
  for (std::uint64_t i = 0; i < kPaths; ++i) {
    PathRng rng(peekstat::path_seed(seed, i));
    xs[i] = per_path(rng);
  }
  return peekstat::mean_estimate(xs);
}

TEST(GaussianExp, FirstStepWithZeroDraw) {
  const PathState s = peekstat::step_gaussian_exp(peekstat::start_path(), 1.0, 0.0);
  EXPECT_EQ(s.t, 1u);
  EXPECT_NEAR(s.m(), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(s.m(), 0.6065306597, 1e-10);
  EXPECT_EQ(s.s(), 1.0);
  EXPECT_EQ(s.v, 1.0);
}

TEST(GaussianExp, HalfLambdaDrawLeavesMUnchanged) {
  for (double lam : {0.1, 1.0, -2.0, 3.7}) {
    PathState s = peekstat::start_path();
    s.log_m = 0.3;
    s.log_s = 0.5;
    const PathState n = peekstat::step_gaussian_exp(s, lam, lam / 2.0);
    EXPECT_NEAR(n.log_m, 0.3, 1e-15);
    EXPECT_EQ(n.log_s, 0.5);
  }
}

TEST(GaussianExp, ZeroLambdaThrows) {
  EXPECT_THROW(peekstat::step_gaussian_exp(peekstat::start_path(), 0.0, 1.0), peekstat::DomainError);
}

TEST(GaussianExp, MeanOfM10IsOne) {
  // lambda = 0.5 keeps Var M_10 = e^2.5 - 1 small enough for 3 standard errors to mean something.
  const auto est = monte_carlo(101, [](PathRng& rng) {
    PathState s = peekstat::start_path();
    for (int t = 0; t < 10; ++t) s = peekstat::step_gaussian_exp(s, 0.5, rng.normal());
    return s.m();
  });
  EXPECT_LE(std::abs(est.mean - 1.0), 3.0 * est.stderr_) << est.mean << " +- " << est.stderr_;
}

TEST(GaussianExp, RunningMaxAndDeterminism) {
  PathRng a(77);
  PathRng b(77);
  PathState s = peekstat::start_path(77);
  PathState u = peekstat::start_path(77);
  double max_log = 0.0;
  for (int t = 0; t < 5000; ++t) {
    s = peekstat::step_gaussian_exp(s, 1.0, a.normal());
    u = peekstat::step_gaussian_exp(u, 1.0, b.normal());
    max_log = std::max(max_log, s.log_m);
    ASSERT_EQ(s.log_m, u.log_m);
    ASSERT_EQ(s.log_s, max_log);
    ASSERT_GE(s.log_s, s.log_m);
  }
  // Thousands of steps in: M is far below the smallest double but log M is exact.
  EXPECT_TRUE(std::isfinite(s.log_m));
  EXPECT_LT(s.log_m, -1000.0);
}

TEST(FixedTimePvalue, Examples) {
  EXPECT_EQ(peekstat::fixed_time_pvalue(0.0, 10), 1.0);
  EXPECT_NEAR(peekstat::fixed_time_pvalue(2.0, 1), std::exp(-2.0), 1e-16);
  EXPECT_NEAR(peekstat::fixed_time_pvalue(2.0, 1), 0.1353352832, 1e-10);
  EXPECT_EQ(peekstat::fixed_time_pvalue(-2.0, 1), peekstat::fixed_time_pvalue(2.0, 1));
  EXPECT_THROW(peekstat::fixed_time_pvalue(1.0, 0), peekstat::DomainError);
}

TEST(ZTestPvalue, TwoSidedNormalTail) {
  EXPECT_NEAR(peekstat::ztest_pvalue(1.959963984540054, 1), 0.05, 1e-12);
  EXPECT_NEAR(peekstat::ztest_pvalue(-1.959963984540054 * 10.0, 100), 0.05, 1e-12);
  EXPECT_EQ(peekstat::ztest_pvalue(0.0, 5), 1.0);
  EXPECT_THROW(peekstat::ztest_pvalue(1.0, 0), peekstat::DomainError);
  // The Chernoff form is the conservative one at a fixed time.
  for (double z : {0.5, 1.0, 2.0, 4.0}) {
    EXPECT_GE(peekstat::fixed_time_pvalue(z, 1), peekstat::ztest_pvalue(z, 1));
  }
}

TEST(MixtureGrid, DefaultGeometricGrid) {
  const auto g = MixtureGrid::geometric();
  ASSERT_EQ(g.lambdas.size(), 100u);
  EXPECT_NO_THROW(g.validate());
  EXPECT_NEAR(g.lambdas[0], 4.0 / std::sqrt(1.1), 1e-12);
  for (std::size_t k = 1; k < g.lambdas.size(); ++k) {
    EXPECT_NEAR(g.lambdas[k - 1] / g.lambdas[k], 1.1, 1e-12);
  }
  // Weight ratio follows 1 / (lambda ln^1.4(e lambda_max / lambda)).
  const auto raw = [&](std::size_t k) {
    return 1.0 / (g.lambdas[k] * std::pow(std::log(std::exp(1.0) * 4.0 / g.lambdas[k]), 1.4));
  };
  EXPECT_NEAR(g.weights[10] / g.weights[3], raw(10) / raw(3), 1e-12);
}

TEST(MixtureGrid, ValidationErrors) {
  MixtureGrid g{{1.0, 2.0}, {0.5, 0.4}};
  EXPECT_THROW(g.validate(), peekstat::DomainError);
  g = MixtureGrid{{1.0}, {1.0, 0.0}};
  EXPECT_THROW(g.validate(), peekstat::DomainError);
  g = MixtureGrid{{-1.0}, {1.0}};
  EXPECT_THROW(g.validate(), peekstat::DomainError);
  EXPECT_THROW(MixtureGrid::geometric(1.0), peekstat::DomainError);
}

TEST(Mixture, StartsAtOne) {
  const PathState s = peekstat::start_path();
  EXPECT_EQ(s.m(), 1.0);
  EXPECT_NEAR(peekstat::mixture_log_value(MixtureGrid::geometric(), 0.0, 0.0), 0.0, 1e-14);
}

TEST(Mixture, SingleAtomMatchesGaussianExpPath) {
  const MixtureGrid one{{1.0}, {1.0}};
  PathRng rng(8);
  PathState a = peekstat::start_path();
  PathState b = peekstat::start_path();
  for (int t = 0; t < 2000; ++t) {
    const double z = rng.normal();
    a = peekstat::step_gaussian_exp(a, 1.0, z);
    b = peekstat::step_mixture(b, one, z);
    ASSERT_NEAR(a.log_m, b.log_m, 1e-9 * std::max(1.0, std::abs(a.log_m)));
    ASSERT_NEAR(a.log_s, b.log_s, 1e-9 * std::max(1.0, std::abs(a.log_s)));
  }
}

TEST(Mixture, SupermartingaleMeanAtT20) {
  const auto grid = MixtureGrid::geometric();
  const auto est = monte_carlo(202, [&](PathRng& rng) {
    double z = 0.0;
    for (int t = 0; t < 20; ++t) z += rng.normal();
    return std::exp(peekstat::mixture_log_value(grid, z, 20.0));
  });
  EXPECT_LE(est.mean, 1.0 + 3.0 * est.stderr_) << est.mean << " +- " << est.stderr_;
}

TEST(Mixture, LogSpaceStabilityAtExtremeStatistics) {
  const auto grid = MixtureGrid::geometric();
  const double lam_max = grid.lambdas.front();
  for (double target : {-700.0, -100.0, 100.0, 700.0}) {
    PathState s = peekstat::start_path();
    s = peekstat::step_mixture(s, grid, target / lam_max);
    const double w = s.m();
    EXPECT_TRUE(std::isfinite(s.log_m));
    EXPECT_TRUE(std::isfinite(w));
    EXPECT_GT(w, 0.0);
    const double h = peekstat::h_value(w);
    EXPECT_TRUE(std::isfinite(h));
    EXPECT_NEAR(peekstat::h_value_from_log(s.log_m), h, 1e-12 * h);
  }
}

TEST(Mixture, NonpositiveSigmaThrows) {
  EXPECT_THROW(peekstat::step_mixture(peekstat::start_path(), MixtureGrid::geometric(), 0.0, 0.0),
               peekstat::DomainError);
}

TEST(MixtureEvaluator, LazyEvaluationNeverHidesACrossing) {
  const auto grid = MixtureGrid::geometric();
  const peekstat::MixtureEvaluator ev(grid);
  PathRng rng(31);
  for (int i = 0; i < 20000; ++i) {
    const double v = 1.0 + std::floor(rng.uniform() * 5000.0);
    const double z = rng.normal() * std::sqrt(v) * 2.0;
    const double exact = peekstat::mixture_log_value(grid, z, v);
    ASSERT_NEAR(ev.log_value(z, v), exact, 1e-12 * std::max(1.0, std::abs(exact)));
    ASSERT_GE(ev.log_upper_bound(z, v), exact - 1e-12);
    const double threshold = exact + (rng.uniform() - 0.5) * 4.0;
    const auto lazy = ev.log_value_if_above(z, v, threshold);
    if (exact >= threshold) {
      ASSERT_TRUE(lazy.has_value()) << "z=" << z << " v=" << v;
    }
    if (lazy) ASSERT_EQ(*lazy, ev.log_value(z, v));
  }
}

TEST(HValue, Examples) {
  EXPECT_EQ(peekstat::h_value(1.0), 1.0);
  EXPECT_DOUBLE_EQ(peekstat::h_value(20.0), 0.05);
  EXPECT_EQ(peekstat::h_value(0.0), INFINITY);
  EXPECT_THROW(peekstat::h_value(-1.0), peekstat::DomainError);
}

TEST(LikelihoodRatio, Examples) {
  PathState s = peekstat::start_path();
  for (int t = 0; t < 10; ++t) s = peekstat::step_likelihood_ratio(s, 0.3, 0.3);
  EXPECT_EQ(s.m(), 1.0);
  s = peekstat::start_path();
  s = peekstat::step_likelihood_ratio(s, 2.0, 1.0);
  s = peekstat::step_likelihood_ratio(s, 1.0, 2.0);
  EXPECT_NEAR(s.m(), 1.0, 1e-15);
  EXPECT_NEAR(s.s(), 2.0, 1e-15);
  EXPECT_THROW(peekstat::step_likelihood_ratio(s, 1.0, 0.0), peekstat::DomainError);
  EXPECT_THROW(peekstat::step_likelihood_ratio(s, -1.0, 1.0), peekstat::DomainError);
}

TEST(LikelihoodRatio, MeanOfM15UnderTheNull) {
  // Null g = N(0, 1), alternative f = N(0.3, 1).
  const auto density = [](double x, double mu) { return std::exp(-0.5 * (x - mu) * (x - mu)); };
  const auto est = monte_carlo(303, [&](PathRng& rng) {
    PathState s = peekstat::start_path();
    for (int t = 0; t < 15; ++t) {
      const double x = rng.normal();
      s = peekstat::step_likelihood_ratio(s, density(x, 0.3), density(x, 0.0));
    }
    return s.m();
  });
  EXPECT_LE(std::abs(est.mean - 1.0), 3.0 * est.stderr_) << est.mean << " +- " << est.stderr_;
}

TEST(LatticeWalk, ConstructionAndAbsorption) {
  peekstat::LatticeWalk w(0.25);
  EXPECT_EQ(w.m(), 1.0);
  for (int i = 0; i < 4; ++i) w.step(false);
  EXPECT_TRUE(w.absorbed());
  w.step(true);
  EXPECT_EQ(w.m(), 0.0);
  EXPECT_THROW(peekstat::LatticeWalk(0.3), peekstat::DomainError);
  EXPECT_THROW(peekstat::LatticeWalk(0.0), peekstat::DomainError);
  EXPECT_THROW(peekstat::LatticeWalk(2.0), peekstat::DomainError);
}

TEST(LatticeWalk, MartingaleMean) {
  const auto est = monte_carlo(404, [](PathRng& rng) {
    peekstat::LatticeWalk w(0.25);
    for (int t = 0; t < 50; ++t) w.step(rng.coin());
    return w.m();
  });
  EXPECT_LE(std::abs(est.mean - 1.0), 3.0 * est.stderr_);
}

}  // namespace
