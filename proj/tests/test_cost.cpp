#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ftmpc/cost.hpp"
#include "ftmpc/errors.hpp"
#include "oracles.hpp"

using namespace ftmpc;

namespace {

QuadraticStageCost tank_weights(const Vector& x_s, const Vector& u_s) {
  Vector q(4), r(2);
  q << 1.0, 1.0, 1e-2, 1e-2;
  r << 1e-4, 1e-4;
  return QuadraticStageCost(x_s, u_s, q, r);
}

}  // namespace

TEST(StageCost, VanishesAtSetpoint) {
  const auto& setup = fixtures::four_tank();
  EXPECT_EQ(stage_cost(setup.cost, setup.cost.x_s(), setup.cost.u_s()), 0.0);
}

TEST(StageCost, UnitDeviationInFirstLevel) {
  const Vector x_s = Vector::Constant(4, 10.0), u_s = Vector::Constant(2, 30.0);
  const auto c = tank_weights(x_s, u_s);
  Vector x = x_s;
  x(0) += 1.0;
  EXPECT_DOUBLE_EQ(stage_cost(c, x, u_s), 1.0);
}

TEST(StageCost, MixedStateAndInputDeviation) {
  const Vector x_s = Vector::Constant(4, 10.0), u_s = Vector::Constant(2, 30.0);
  const auto c = tank_weights(x_s, u_s);
  Vector x = x_s, u = u_s;
  x(2) += 10.0;
  u(0) += 100.0;
  EXPECT_NEAR(stage_cost(c, x, u), 2.0, 1e-12);
}

TEST(StageCost, RejectsNonPositiveWeights) {
  const Vector z = Vector::Zero(2);
  EXPECT_THROW(QuadraticStageCost(z, Vector::Zero(1), Vector::Ones(2), Vector::Zero(1)), DomainError);
  EXPECT_THROW(QuadraticStageCost(z, Vector::Zero(1), Vector::Constant(2, -1.0), Vector::Ones(1)),
               DomainError);
  EXPECT_THROW(QuadraticStageCost(z, Vector::Zero(1), Vector::Ones(3), Vector::Ones(1)), DomainError);
}

TEST(StageCostMin, InteriorSetpointGivesStatePart) {
  const auto& setup = fixtures::four_tank();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Vector x = oracle::random_vector(rng, 4, 7.5, 28.0);
    EXPECT_DOUBLE_EQ(stage_cost_min(setup.cost, setup.sys.box(), x), state_cost(setup.cost, x));
  }
  EXPECT_EQ(stage_cost_min(setup.cost, setup.sys.box(), setup.cost.x_s()), 0.0);
}

TEST(StageCostMin, InfeasibleSetpointPaysClipDistance) {
  Vector one = Vector::Ones(1);
  const QuadraticStageCost c(Vector::Zero(1), Vector::Constant(1, 2.0), one, one);
  const ConstraintBox box(Vector::Constant(1, -5.0), Vector::Constant(1, 5.0), Vector::Zero(1), one);
  EXPECT_DOUBLE_EQ(stage_cost_min(c, box, Vector::Zero(1)), 1.0);
}

TEST(StageCostGradients, MatchFiniteDifferences) {
  const auto& c = fixtures::four_tank().cost;
  std::mt19937_64 rng(17);
  const Vector x = oracle::random_vector(rng, 4, 8.0, 20.0);
  const Vector u = oracle::random_vector(rng, 2, 0.0, 60.0);
  const Vector gx = stage_cost_state_gradient(c, x);
  const Vector gu = stage_cost_input_gradient(c, u);
  const double h = 1e-5;
  for (int i = 0; i < 4; ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    EXPECT_NEAR(gx(i), (stage_cost(c, xp, u) - stage_cost(c, xm, u)) / (2 * h), 1e-6);
  }
  for (int j = 0; j < 2; ++j) {
    Vector up = u, um = u;
    up(j) += h;
    um(j) -= h;
    EXPECT_NEAR(gu(j), (stage_cost(c, x, up) - stage_cost(c, x, um)) / (2 * h), 1e-6);
  }
}

// Property: l_min(x) <= l(x, u) for every admissible u.
TEST(StageCostMinProperty, LowerBoundsEveryFeasibleInput) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = oracle::uniform_int(rng, 1, 5), m = oracle::uniform_int(rng, 1, 3);
    const Vector q = oracle::random_vector(rng, n, 0.01, 5.0);
    const Vector r = oracle::random_vector(rng, m, 0.01, 5.0);
    const Vector u_lo = oracle::random_vector(rng, m, -3.0, 0.0);
    const Vector u_hi = u_lo + oracle::random_vector(rng, m, 0.1, 3.0);
    const Vector u_s = oracle::random_vector(rng, m, -4.0, 4.0);  // possibly outside U
    const QuadraticStageCost c(Vector::Zero(n), u_s, q, r);
    const ConstraintBox box(Vector::Constant(n, -10.0), Vector::Constant(n, 10.0), u_lo, u_hi);
    const Vector x = oracle::random_vector(rng, n, -10.0, 10.0);
    const double lmin = stage_cost_min(c, box, x);
    for (int s = 0; s < 20; ++s) {
      Vector u(m);
      for (int j = 0; j < m; ++j) u(j) = oracle::uniform(rng, u_lo(j), u_hi(j));
      EXPECT_LE(lmin, stage_cost(c, x, u) + 1e-12);
    }
  }
}

// Property: the two-sided quadratic sandwich with interior u_s.
TEST(StageCostMinProperty, QuadraticSandwich) {
  const auto& c = fixtures::four_tank().cost;
  const auto& box = fixtures::four_tank().sys.box();
  const double lo = c.q_diag().minCoeff(), hi = c.q_diag().maxCoeff();
  std::mt19937_64 rng(123);
  for (int i = 0; i < 200; ++i) {
    const Vector x = oracle::random_vector(rng, 4, 7.5, 28.0);
    const double d2 = (x - c.x_s()).squaredNorm();
    const double lmin = stage_cost_min(c, box, x);
    EXPECT_GE(lmin, lo * d2 * (1 - 1e-12));
    EXPECT_LE(lmin, hi * d2 * (1 + 1e-12));
  }
}
