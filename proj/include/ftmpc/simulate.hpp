#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ftmpc/certify.hpp"
#include "ftmpc/mpc.hpp"

namespace ftmpc {

struct FailureRecord {
  int step = 0;
  SolveStatus status = SolveStatus::infeasible;
  std::string message;
};

/// Closed-loop history. Per-solve entries (values, statuses, ...) cover the
/// states x(0) .. x(T); per-transition entries (inputs, stage costs, margins)
/// cover t = 0 .. T - 1. A failed solve truncates the trace at that step.
struct ClosedLoopTrace {
  std::vector<int> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  std::vector<double> stage_costs;
  std::vector<double> state_costs_min;  // l_min(x(t))
  std::vector<double> values;
  std::vector<double> decrease_margins;  // V(t+1) - V(t) + rate * l(t)
  std::vector<SolveStatus> statuses;
  std::vector<int> iterations;
  std::vector<double> kkt_residuals;
  std::vector<double> penalties;
  double descent_rate = 0.0;
  double kkt_tolerance = 0.0;
  std::optional<FailureRecord> failure;

  int steps() const { return static_cast<int>(inputs.size()); }
  bool complete() const { return !failure.has_value(); }
};

/// Simulates x(t+1) = f(x(t), u*(0|t)) for T steps with a warm-started solver.
/// `descent_rate` is the eps_{N,M} used for decrease_margins.
ClosedLoopTrace run_closed_loop(const MpcProblem& problem, const Vector& x0, int T,
                                double descent_rate = 0.0);

/// Constants a trace is checked against.
struct GuaranteeBounds {
  double eps = 0.0;          // eps_{N,M}
  double gamma_bound = 0.0;  // upper sandwich constant
  std::string label;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst_margin = 0.0;  // <= 0 is good for every check
  int worst_step = -1;
};

struct GuaranteeReport {
  GuaranteeBounds bounds;
  std::vector<CheckResult> checks;

  bool passed() const;
  const CheckResult& check(const std::string& name) const;
};

/// Checks: "descent", "performance", "sandwich", "monotone", "convergence",
/// "constraints", "solver". Descent, monotone and sandwich use the slack
/// 10 * kkt_tolerance * max(|V(t)|, |V(t+1)|, kkt_tolerance); performance
/// uses 10 * kkt_tolerance times its bound.
GuaranteeReport verify_guarantees(const ClosedLoopTrace& trace, const ConstraintBox& box,
                                  const GuaranteeBounds& bounds);
GuaranteeReport verify_guarantees(const ClosedLoopTrace& trace, const ConstraintBox& box,
                                  const HorizonCertificate& cert);

/// One row per step: t, x_1..x_n, u_1..u_m, stage_cost, value,
/// decrease_margin, solver_status, solver_iters, kkt_residual, penalty.
void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace);

/// Levels and inflows against time in seconds, with the box bounds.
void write_plot_csv(std::ostream& os, const ClosedLoopTrace& trace, const ConstraintBox& box,
                    const Vector& x_s, const Vector& u_s, double sample_time);

}  // namespace ftmpc
