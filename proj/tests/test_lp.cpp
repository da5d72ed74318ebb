#include <gtest/gtest.h>

#include "ftmpc/lp.hpp"

using namespace ftmpc;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> data) {
  Matrix M(data.size(), data.begin()->size());
  int i = 0;
  for (const auto& r : data) {
    int j = 0;
    for (double v : r) M(i, j++) = v;
    ++i;
  }
  return M;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(v.size());
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST(SolveLp, TextbookMaximization) {
  // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
  LinearProgram lp;
  lp.c = vec({3.0, 5.0});
  lp.A_ub = rows({{1, 0}, {0, 2}, {3, 2}});
  lp.b_ub = vec({4, 12, 18});
  lp.A_eq = Matrix::Zero(0, 2);
  lp.b_eq = Vector::Zero(0);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.objective, 36.0, 1e-9);
  EXPECT_NEAR(r.x(0), 2.0, 1e-9);
  EXPECT_NEAR(r.x(1), 6.0, 1e-9);
}

TEST(SolveLp, EqualityConstraintsNeedPhaseOne) {
  // max x1 + 2 x2  s.t. x1 + x2 = 1  ->  x2 = 1
  LinearProgram lp;
  lp.c = vec({1.0, 2.0});
  lp.A_ub = Matrix::Zero(0, 2);
  lp.b_ub = Vector::Zero(0);
  lp.A_eq = rows({{1, 1}});
  lp.b_eq = vec({1.0});
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.objective, 2.0, 1e-12);
}

TEST(SolveLp, DetectsInfeasibility) {
  LinearProgram lp;
  lp.c = vec({1.0});
  lp.A_ub = rows({{1}});
  lp.b_ub = vec({1.0});
  lp.A_eq = rows({{1}});
  lp.b_eq = vec({2.0});
  EXPECT_EQ(solve_lp(lp).status, LpStatus::infeasible);
}

TEST(SolveLp, DetectsUnboundedness) {
  LinearProgram lp;
  lp.c = vec({1.0, 0.0});
  lp.A_ub = rows({{-1, 1}});
  lp.b_ub = vec({1.0});
  lp.A_eq = Matrix::Zero(0, 2);
  lp.b_eq = Vector::Zero(0);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::unbounded);
}

TEST(SolveLp, DegenerateVertexTerminates) {
  // Beale-style cycling example; Bland's rule must terminate.
  LinearProgram lp;
  lp.c = vec({0.75, -150.0, 0.02, -6.0});
  lp.A_ub = rows({{0.25, -60, -0.04, 9}, {0.5, -90, -0.02, 3}, {0, 0, 1, 0}});
  lp.b_ub = vec({0, 0, 1});
  lp.A_eq = Matrix::Zero(0, 4);
  lp.b_eq = Vector::Zero(0);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.objective, 0.05, 1e-9);
}
