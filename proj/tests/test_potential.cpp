#include "peekstat/potential.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "gtest/gtest.h"

namespace {

using peekstat::DistributionModel;
using peekstat::Potential;
using peekstat::PotentialMode;

struct Named {
  std::string name;
  Potential p;
};

std::vector<Named> closed_form_potentials() {
  return {{"log", Potential::log()},
          {"power(0.5)", Potential::power(0.5)},
          {"power(0.2)", Potential::power(0.2)},
          {"power(0)", Potential::power(0.0)},
          {"tq(uniform)", Potential::tail_quantile_of(DistributionModel::uniform01())},
          {"tq(pareto2)", Potential::tail_quantile_of(DistributionModel::pareto(2.0))},
          {"tq(pareto3)", Potential::tail_quantile_of(DistributionModel::pareto(3.0))},
          {"tq(exp)", Potential::tail_quantile_of(DistributionModel::exponential(0.7))},
          {"tq(empirical)", Potential::tail_quantile_of(DistributionModel::empirical({0, 1, 1, 3, 7}))}};
}

TEST(Potential, LogAtOne) {
  const auto v = peekstat::potential_eval(Potential::log(), 1.0);
  EXPECT_EQ(v.g, 0.0);
  EXPECT_EQ(v.G, 1.0);
  EXPECT_EQ(v.Gprime, 1.0);
}

TEST(Potential, PowerHalfAtFour) {
  // G(s) = s^a / (1 - a) and G'(s) = a s^(a-1) / (1 - a): at s = 4, G = 4 and
  // G' = 0.5, consistent with g(4) = G(4) - 4 G'(4) = 2.
  const auto v = peekstat::potential_eval(Potential::power(0.5), 4.0);
  EXPECT_DOUBLE_EQ(v.g, 2.0);
  EXPECT_DOUBLE_EQ(v.G, 4.0);
  EXPECT_DOUBLE_EQ(v.Gprime, 0.5);
  const auto q = peekstat::potential_eval(Potential::power(0.5, PotentialMode::Quadrature), 4.0);
  EXPECT_NEAR(q.G, 4.0, 1e-8);
  EXPECT_NEAR(q.Gprime, 0.5, 1e-8);
}

TEST(Potential, TailQuantileOfUniformAtTwo) {
  const Potential p = Potential::tail_quantile_of(DistributionModel::uniform01());
  const auto v = p.eval(2.0);
  EXPECT_DOUBLE_EQ(v.g, 0.5);
  EXPECT_DOUBLE_EQ(v.G, 0.75);
  EXPECT_DOUBLE_EQ(v.Gprime, 0.125);
  EXPECT_DOUBLE_EQ(v.G, peekstat::G_mu(DistributionModel::uniform01(), 2.0));
  EXPECT_DOUBLE_EQ(v.g, peekstat::g_mu(DistributionModel::uniform01(), 2.0));
}

TEST(Potential, ClosedFormAgreesWithQuadrature) {
  for (const auto& [name, p] : closed_form_potentials()) {
    const Potential q = p.with_mode(PotentialMode::Quadrature);
    for (double s : {0.25, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 100.0, 1e4}) {
      if (p.kind() == peekstat::PotentialKind::Log && s < 1.0) continue;
      EXPECT_NEAR(p.G(s), q.G(s), 1e-8 * std::max(1.0, std::abs(p.G(s)))) << name << " s=" << s;
      EXPECT_NEAR(p.Gprime(s), q.Gprime(s), 1e-8 * std::max(1.0, p.Gprime(s))) << name << " s=" << s;
    }
  }
}

TEST(Potential, DerivativeMatchesFiniteDifferences) {
  for (const auto& [name, p] : closed_form_potentials()) {
    if (p.kind() == peekstat::PotentialKind::TailQuantileOf &&
        p.distribution()->kind() == peekstat::DistKind::Empirical) {
      continue;  // piecewise; G' is one-sided at the kinks
    }
    for (double s : {1.3, 2.0, 5.0, 40.0}) {
      const double h = 1e-5 * s;
      const double fd = (p.G(s + h) - p.G(s - h)) / (2.0 * h);
      EXPECT_NEAR(p.Gprime(s), fd, 1e-6 * std::max(1.0, std::abs(fd))) << name << " s=" << s;
    }
  }
}

// Property: G is nondecreasing and concave, G' >= 0 is nonincreasing, and
// g = G - s G' on a grid, for every closed form and in quadrature mode.
TEST(PotentialProperties, ConcaveNondecreasingAndIdentity) {
  for (const auto& [name, base] : closed_form_potentials()) {
    for (auto mode : {PotentialMode::ClosedForm, PotentialMode::Quadrature}) {
      const Potential p = base.with_mode(mode);
      std::vector<double> grid;
      for (double s = 1.0; s <= 50.0; s *= 1.07) grid.push_back(s);
      double prev_G = -INFINITY;
      double prev_slope = INFINITY;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double s = grid[i];
        const auto v = p.eval(s);
        const double tol = 1e-8 * std::max(1.0, std::abs(v.G));
        ASSERT_GE(v.G, prev_G - tol) << name;
        ASSERT_GE(v.Gprime, -1e-12) << name;
        ASSERT_LE(v.Gprime, prev_slope + 1e-8) << name << " s=" << s;
        ASSERT_NEAR(v.g, v.G - s * v.Gprime, tol) << name << " s=" << s;
        if (i >= 2) {
          const double a = grid[i - 2];
          const double b = grid[i - 1];
          const double chord = p.G(a) + (p.G(s) - p.G(a)) * (b - a) / (s - a);
          ASSERT_GE(p.G(b), chord - tol) << name << " concavity at " << b;
        }
        prev_G = v.G;
        prev_slope = v.Gprime;
      }
    }
  }
}

TEST(Potential, IntegrabilityIsCheckedAtConstruction) {
  EXPECT_THROW(Potential::power(1.0), peekstat::NonintegrableTail);
  EXPECT_THROW(Potential::power(1.5), peekstat::NonintegrableTail);
  EXPECT_THROW(Potential::power(-0.1), peekstat::NonintegrableTail);
  EXPECT_THROW(Potential::tail_quantile_of(DistributionModel::pareto(1.0)), peekstat::NonintegrableTail);
}

TEST(Potential, DomainErrors) {
  EXPECT_THROW(Potential::log().G(-1.0), peekstat::DomainError);
  EXPECT_THROW(Potential::log().Gprime(0.0), peekstat::DomainError);
  EXPECT_THROW(Potential::log().tail_integral(0.0), peekstat::DomainError);
}

TEST(Potential, TailIntegralIsGOverS) {
  const Potential p = Potential::power(0.5);
  // integral_4^inf x^(1/2) / x^2 dx = 2 / sqrt(4) = 1.
  EXPECT_NEAR(p.tail_integral(4.0), 1.0, 1e-15);
}

TEST(TablePotential, MonotoneInterpolationAndQuadratureOnly) {
  std::vector<std::pair<double, double>> knots;
  for (double x = 1.0; x <= 1e4; x *= 1.1) knots.emplace_back(x, std::log(x));
  const Potential t = Potential::table(knots);
  EXPECT_EQ(t.mode(), PotentialMode::Quadrature);
  EXPECT_THROW(t.with_mode(PotentialMode::ClosedForm), peekstat::DomainError);
  // Knot values are reproduced and the interpolant is monotone between knots.
  for (const auto& [x, y] : knots) EXPECT_NEAR(t.g(x), y, 1e-14);
  double prev = -INFINITY;
  for (double x = 1.0; x < 2000.0; x += 0.37) {
    ASSERT_GE(t.g(x), prev);
    prev = t.g(x);
  }
  // With knots 10% apart, linear interpolation of log x loses about 1e-4
  // of G(1) = 1.
  EXPECT_NEAR(t.G(1.0), 1.0, 1e-3);
  const auto v = t.eval(3.0);
  EXPECT_NEAR(v.g, v.G - 3.0 * v.Gprime, 1e-8);
}

TEST(TablePotential, RejectsBadTables) {
  EXPECT_THROW(Potential::table({}), peekstat::DomainError);
  EXPECT_THROW(Potential::table({{1.0, 2.0}, {2.0, 1.0}}), peekstat::DomainError);
  EXPECT_THROW(Potential::table({{2.0, 1.0}, {1.0, 2.0}}), peekstat::DomainError);
  EXPECT_THROW(Potential::table({{0.0, 1.0}, {1.0, 2.0}}), peekstat::DomainError);
}

}  // namespace
