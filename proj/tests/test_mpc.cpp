#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ftmpc/errors.hpp"
#include "ftmpc/mpc.hpp"
#include "oracles.hpp"

using namespace ftmpc;

namespace {

MpcProblem four_tank_problem(int N, int M) {
  MpcConfig mpc = fixtures::four_tank_config().mpc;
  mpc.N = N;
  mpc.M = M;
  return fixtures::four_tank().problem(mpc);
}

std::vector<Vector> constant_inputs(const Vector& u, int N) { return std::vector<Vector>(N, u); }

/// Random linear-quadratic instance with an LQR tail and a box wide enough to
/// stay inactive from |x0| <= 1.
struct LqInstance {
  Matrix A, B, K;
  MpcProblem problem;
  Vector x0;
};

LqInstance random_lq(std::mt19937_64& rng, int N, int M) {
  const int n = oracle::uniform_int(rng, 1, 4), m = oracle::uniform_int(rng, 1, 2);
  const Matrix A = oracle::random_matrix(rng, n, n, 0.5);
  const Matrix B = oracle::random_matrix(rng, n, m);
  const Vector q = oracle::random_vector(rng, n, 0.2, 2.0);
  const Vector r = oracle::random_vector(rng, m, 0.2, 2.0);
  QuadraticStageCost cost(Vector::Zero(n), Vector::Zero(m), q, r);
  const Matrix K = dare_solve(A, B, cost.Q(), cost.R()).K;
  DiscreteSystem sys = fixtures::linear_system(A, B, 100.0, 100.0);
  TailController kappa = fixed_gain_tail_controller(sys, K);
  MpcConfig cfg;
  cfg.N = N;
  cfg.M = M;
  return {A, B, K, MpcProblem{std::move(sys), std::move(cost), std::move(kappa), cfg},
          oracle::random_vector(rng, n, -1.0, 1.0)};
}

}  // namespace

TEST(MpcConfig, RejectsZeroHorizons) {
  MpcConfig cfg;
  cfg.N = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg.N = 1;
  cfg.M = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  SolverSettings s;
  s.penalty_growth = 1.0;
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(Objective, ZeroAtSetpoint) {
  const MpcProblem p = four_tank_problem(5, 25);
  const auto ev = objective(p, p.sys.x_eq(), constant_inputs(p.sys.u_eq(), 5));
  EXPECT_LT(ev.value, 1e-18);
  EXPECT_LT(ev.gradient.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_TRUE(ev.tail_feasible);
  EXPECT_EQ(ev.states.size(), 31u);
}

TEST(Objective, GradientMatchesCentralDifferences) {
  const MpcProblem p = four_tank_problem(5, 25);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x0 = p.sys.x_eq() + oracle::random_vector(rng, 4, -3.0, 3.0);
    std::vector<Vector> u(5);
    for (auto& uk : u) uk = oracle::random_vector(rng, 2, 5.0, 55.0);
    const auto ev = objective(p, x0, u);
    const double h = 1e-5;
    for (int k = 0; k < 5; ++k) {
      for (int j = 0; j < 2; ++j) {
        auto up = u, um = u;
        up[k](j) += h;
        um[k](j) -= h;
        const double fd = (objective(p, x0, up).value - objective(p, x0, um).value) / (2 * h);
        const double g = ev.gradient(2 * k + j);
        EXPECT_LE(std::abs(g - fd), 1e-4 * std::max(std::abs(fd), 1e-3))
            << "trial " << trial << " k " << k << " j " << j;
      }
    }
  }
}

TEST(Solve, SetpointIsOptimalWithZeroValue) {
  const MpcProblem p = four_tank_problem(5, 25);
  const MpcSolution s = solve(p, p.sys.x_eq());
  ASSERT_TRUE(s.optimal());
  EXPECT_LT(s.value, 1e-16);
  EXPECT_LT((s.u_seq[0] - p.sys.u_eq()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Solve, ReferenceInitialStateIsOptimal) {
  const MpcProblem p = four_tank_problem(5, 25);
  const MpcSolution s = solve(p, fixtures::four_tank_x0());
  EXPECT_EQ(s.status, SolveStatus::optimal);
  EXPECT_TRUE(std::isfinite(s.value));
  EXPECT_TRUE(s.tail.feasible());
  EXPECT_EQ(s.constraint_violation, 0.0);
  for (const auto& u : s.u_seq) EXPECT_TRUE(p.sys.box().contains_input(u));
}

TEST(Solve, InitialStateOutsideBoxIsInfeasible) {
  const MpcProblem p = four_tank_problem(5, 25);
  Vector x0 = p.sys.x_eq();
  x0(0) = 40.0;
  const MpcSolution s = solve(p, x0);
  EXPECT_EQ(s.status, SolveStatus::infeasible);
  EXPECT_TRUE(std::isinf(s.value));
}

TEST(Solve, RejectsWrongWarmStartLength) {
  const MpcProblem p = four_tank_problem(5, 25);
  EXPECT_THROW(solve(p, p.sys.x_eq(), constant_inputs(p.sys.u_eq(), 4)), DomainError);
}

TEST(Solve, LinearQuadraticMatchesBatchAndRiccatiOracles) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int N = oracle::uniform_int(rng, 1, 10), M = oracle::uniform_int(rng, 1, 30);
    const LqInstance lq = random_lq(rng, N, M);
    const Matrix P_M =
        oracle::tail_weight(lq.A, lq.B, lq.problem.cost.Q(), lq.problem.cost.R(), lq.K, M);
    const auto batch = oracle::batch_lq(lq.A, lq.B, lq.problem.cost.Q(), lq.problem.cost.R(), P_M, N, lq.x0);
    const double expected = batch.min_value();
    const double riccati = oracle::riccati_value(lq.A, lq.B, lq.problem.cost.Q(), lq.problem.cost.R(), P_M, N, lq.x0);
    ASSERT_NEAR(expected, riccati, 1e-9 * std::max(1.0, riccati));
    const MpcSolution s = solve(lq.problem, lq.x0);
    ASSERT_TRUE(s.optimal()) << "trial " << trial;
    EXPECT_LE(std::abs(s.value - expected), 1e-6 * std::max(expected, 1e-12)) << "trial " << trial;
  }
}

TEST(Solve, WarmAndColdStartAgreeOnConvexInstances) {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    const int N = oracle::uniform_int(rng, 1, 8), M = oracle::uniform_int(rng, 1, 20);
    const LqInstance lq = random_lq(rng, N, M);
    const int m = lq.problem.sys.input_dim();
    std::vector<Vector> warm(N);
    for (auto& u : warm) u = oracle::random_vector(rng, m, -5.0, 5.0);
    const MpcSolution cold = solve(lq.problem, lq.x0);
    const MpcSolution hot = solve(lq.problem, lq.x0, warm);
    ASSERT_TRUE(cold.optimal() && hot.optimal());
    for (int k = 0; k < N; ++k) {
      EXPECT_LT((cold.u_seq[k] - hot.u_seq[k]).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    }
    EXPECT_NEAR(cold.value, hot.value, 1e-6 * std::max(1.0, cold.value));
  }
}

// Property: running kappa for N + M steps is feasible, so V_{N,M}(x) <= V_{f,N+M}(x).
TEST(CandidateBoundProperty, ValueBelowPureTailCost) {
  const auto& setup = fixtures::four_tank();
  const double eps = 0.08;
  const Vector inv_sqrt_q = setup.cost.q_diag().cwiseSqrt().cwiseInverse();
  std::mt19937_64 rng(500);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    Vector d = oracle::random_matrix(rng, 4, 1);
    d.normalize();
    const double radius = std::sqrt(eps) * std::pow(oracle::uniform(rng, 0.0, 1.0), 0.25);
    const Vector x = setup.sys.x_eq() + radius * inv_sqrt_q.cwiseProduct(d);
    const int N = oracle::uniform_int(rng, 1, 8), M = oracle::uniform_int(rng, 1, 30);
    const MpcProblem p = four_tank_problem(N, M);
    const TailEvaluation candidate = finite_tail_cost(setup.sys, setup.cost, setup.kappa, x, N + M);
    ASSERT_TRUE(candidate.feasible());
    const MpcSolution s = solve(p, x);
    ASSERT_TRUE(s.optimal()) << "trial " << trial;
    const double tol = 10 * p.config.solver.kkt_tolerance * std::max(*candidate.value, 1e-12);
    EXPECT_LE(s.value, *candidate.value + tol) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 500);
}

// Property: re-solving from x*(k') with horizon N - k' cannot beat the
// remaining part of the original optimal cost.
TEST(PrincipleOfOptimalityProperty, ShorterHorizonFromPredictedState) {
  const auto& setup = fixtures::four_tank();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int N = oracle::uniform_int(rng, 2, 8), M = oracle::uniform_int(rng, 5, 30);
    const int kp = oracle::uniform_int(rng, 1, N - 1);
    const Vector x0 = setup.sys.x_eq() + oracle::random_vector(rng, 4, -2.0, 2.0);
    const MpcSolution full = solve(four_tank_problem(N, M), x0);
    if (!full.optimal()) continue;
    double spent = 0.0;
    for (int k = 0; k < kp; ++k) spent += stage_cost(setup.cost, full.x_seq[k], full.u_seq[k]);
    const MpcSolution rest = solve(four_tank_problem(N - kp, M), full.x_seq[kp]);
    ASSERT_TRUE(rest.optimal());
    const double tol = 10 * 1e-8 * std::max(full.value, 1e-12);
    EXPECT_LE(rest.value, full.value - spent + tol) << "trial " << trial;
  }
}

// Property: accepted steps never increase the merit within one penalty level.
TEST(MonotoneMeritProperty, LineSearchNeverIncreasesMerit) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int N = oracle::uniform_int(rng, 1, 8), M = oracle::uniform_int(rng, 1, 30);
    const Vector x0 = fixtures::four_tank().sys.x_eq() + oracle::random_vector(rng, 4, -4.0, 4.0);
    const MpcSolution s = solve(four_tank_problem(N, M), x0);
    for (std::size_t i = 1; i < s.merit_history.size(); ++i) {
      const auto& [level, merit] = s.merit_history[i];
      const auto& [prev_level, prev] = s.merit_history[i - 1];
      if (level != prev_level) continue;
      EXPECT_LE(merit, prev + 1e-10 * std::abs(prev)) << "trial " << trial << " step " << i;
    }
  }
}

TEST(MpcSolver, WarmStartedSequenceStaysOptimal) {
  const MpcProblem p = four_tank_problem(5, 25);
  MpcSolver solver(p);
  Vector x = fixtures::four_tank_x0();
  double previous = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 15; ++t) {
    const MpcSolution s = solver.solve(x);
    ASSERT_TRUE(s.optimal()) << "t=" << t;
    EXPECT_LE(s.value, previous * (1 + 1e-7));
    previous = s.value;
    x = p.sys.step(x, s.u_seq[0]);
  }
}
