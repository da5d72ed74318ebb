#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ftmpc/commands.hpp"
#include "ftmpc/simulate.hpp"

using namespace ftmpc;

namespace {

MpcProblem scalar_problem() {
  const Matrix A = Matrix::Constant(1, 1, 1.2), B = Matrix::Constant(1, 1, 1.0);
  DiscreteSystem sys = fixtures::linear_system(A, B, 100.0, 100.0);
  QuadraticStageCost cost(Vector::Zero(1), Vector::Zero(1), Vector::Ones(1),
                          Vector::Constant(1, 0.5));
  TailController kappa = fixed_gain_tail_controller(sys, Matrix::Constant(1, 1, 0.6));
  MpcConfig cfg;
  cfg.N = 3;
  cfg.M = 10;
  return MpcProblem{std::move(sys), std::move(cost), std::move(kappa), cfg};
}

MpcProblem four_tank_problem(int N, int M) {
  MpcConfig mpc = fixtures::four_tank_config().mpc;
  mpc.N = N;
  mpc.M = M;
  return fixtures::four_tank().problem(mpc);
}

const ClosedLoopTrace& reference_run() {
  static const ClosedLoopTrace trace =
      run_closed_loop(four_tank_problem(5, 25), fixtures::four_tank_x0(), 400);
  return trace;
}

}  // namespace

TEST(RunClosedLoop, StationaryAtTheOrigin) {
  const MpcProblem p = scalar_problem();
  const ClosedLoopTrace tr = run_closed_loop(p, Vector::Zero(1), 20, 0.5);
  ASSERT_TRUE(tr.complete());
  EXPECT_EQ(tr.steps(), 20);
  EXPECT_EQ(tr.values.size(), 21u);
  for (double l : tr.stage_costs) EXPECT_EQ(l, 0.0);
  const GuaranteeReport rep = verify_guarantees(tr, p.sys.box(), GuaranteeBounds{0.5, 10.0, "test"});
  EXPECT_TRUE(rep.passed());
  for (const auto& c : rep.checks) EXPECT_EQ(c.worst_margin, 0.0) << c.name;
}

TEST(RunClosedLoop, FourTankSetpointStaysPut) {
  const MpcProblem p = four_tank_problem(5, 25);
  const ClosedLoopTrace tr = run_closed_loop(p, p.sys.x_eq(), 10);
  ASSERT_TRUE(tr.complete());
  for (double l : tr.stage_costs) EXPECT_LT(l, 1e-12);
}

TEST(RunClosedLoop, InfeasibleStartIsRecorded) {
  const MpcProblem p = four_tank_problem(5, 25);
  Vector x0 = p.sys.x_eq();
  x0(1) = 1.0;
  const ClosedLoopTrace tr = run_closed_loop(p, x0, 10);
  ASSERT_FALSE(tr.complete());
  EXPECT_EQ(tr.failure->step, 0);
  EXPECT_EQ(tr.steps(), 0);
  EXPECT_FALSE(verify_guarantees(tr, p.sys.box(), GuaranteeBounds{0.1, 10.0, "x"}).check("solver").passed);
}

TEST(RunClosedLoop, ReferenceRunFollowsThePlant) {
  const auto& tr = reference_run();
  const auto& sys = fixtures::four_tank().sys;
  ASSERT_TRUE(tr.complete());
  ASSERT_EQ(tr.steps(), 400);
  for (int t = 0; t < tr.steps(); ++t) {
    EXPECT_EQ(tr.states[t + 1], sys.step(tr.states[t], tr.inputs[t]));
    EXPECT_TRUE(sys.box().contains(tr.states[t], tr.inputs[t]));
  }
}

TEST(VerifyGuarantees, ReferenceRunPassesWithEmpiricalCertificate) {
  const auto& cfg = fixtures::four_tank_config();
  const GuaranteeBounds bounds = simulation_bounds(cfg, fixtures::four_tank());
  ASSERT_GT(bounds.eps, 0.0);
  const GuaranteeReport rep = verify_guarantees(reference_run(), fixtures::four_tank().sys.box(), bounds);
  for (const auto& c : rep.checks) {
    EXPECT_TRUE(c.passed) << c.name << " worst " << c.worst_margin << " at " << c.worst_step;
  }
}

TEST(VerifyGuarantees, OversizedDescentRateFails) {
  const auto& tr = reference_run();
  const GuaranteeReport rep =
      verify_guarantees(tr, fixtures::four_tank().sys.box(), GuaranteeBounds{1.0, 1e3, "negative control"});
  EXPECT_FALSE(rep.check("descent").passed);
  EXPECT_GT(rep.check("descent").worst_margin, 0.0);
}

TEST(VerifyGuarantees, NonPositiveRateFailsPerformance) {
  const GuaranteeReport rep =
      verify_guarantees(reference_run(), fixtures::four_tank().sys.box(), GuaranteeBounds{-0.5, 1e3, "x"});
  EXPECT_FALSE(rep.check("performance").passed);
}

TEST(VerifyGuarantees, UnknownCheckNameThrows) {
  const GuaranteeReport rep;
  EXPECT_THROW(rep.check("nope"), std::out_of_range);
}

TEST(WriteTraceCsv, HeaderAndRowCount) {
  const MpcProblem p = scalar_problem();
  const ClosedLoopTrace tr = run_closed_loop(p, Vector::Constant(1, 2.0), 5, 0.5);
  std::ostringstream os;
  write_trace_csv(os, tr);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "t,x_1,u_1,stage_cost,value,decrease_margin,solver_status,solver_iters,kkt_residual,penalty");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6);
}

TEST(WritePlotCsv, TimeAxisUsesSampleTime) {
  const MpcProblem p = scalar_problem();
  const ClosedLoopTrace tr = run_closed_loop(p, Vector::Constant(1, 2.0), 3);
  std::ostringstream os;
  write_plot_csv(os, tr, p.sys.box(), Vector::Zero(1), Vector::Zero(1), 3.0);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "time_s,x_1,x_1_s,u_1,u_1_s,x_lo,x_hi,u_lo,u_hi");
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "3,");
}
