#include "ftmpc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "ftmpc/errors.hpp"

namespace ftmpc {

ClosedLoopTrace run_closed_loop(const MpcProblem& problem, const Vector& x0, int T,
                                double descent_rate) {
  if (T < 1) throw DomainError("closed loop needs T >= 1");
  MpcSolver solver(problem);
  ClosedLoopTrace tr;
  tr.descent_rate = descent_rate;
  tr.kkt_tolerance = problem.config.solver.kkt_tolerance;
  const ConstraintBox& box = problem.sys.box();

  Vector x = x0;
  for (int t = 0; t <= T; ++t) {
    MpcSolution sol;
    try {
      sol = solver.solve(x);
    } catch (const RolloutError& e) {
      tr.failure = FailureRecord{t, SolveStatus::infeasible, e.what()};
      break;
    }
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.state_costs_min.push_back(stage_cost_min(problem.cost, box, x));
    tr.values.push_back(sol.value);
    tr.statuses.push_back(sol.status);
    tr.iterations.push_back(sol.iterations);
    tr.kkt_residuals.push_back(sol.kkt_residual);
    tr.penalties.push_back(sol.penalty);
    if (sol.status == SolveStatus::infeasible) {
      tr.failure = FailureRecord{t, sol.status,
                                 "MPC problem infeasible; x(t) is likely outside the "
                                 "certified region"};
      break;
    }
    if (t > 0) {
      const double l = tr.stage_costs.back();
      tr.decrease_margins.push_back(tr.values[t] - tr.values[t - 1] + descent_rate * l);
    }
    if (t == T) break;
    const Vector u = sol.u_seq.front();
    tr.inputs.push_back(u);
    tr.stage_costs.push_back(stage_cost(problem.cost, x, u));
    x = problem.sys.step(x, u);
  }
  // A truncated trace has one more transition than recorded values.
  if (tr.failure && tr.inputs.size() >= tr.values.size() && !tr.inputs.empty()) {
    tr.inputs.pop_back();
    tr.stage_costs.pop_back();
  }
  return tr;
}

bool GuaranteeReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult& GuaranteeReport::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no guarantee check named " + name);
}

namespace {

/// Tracks the largest margin of a "margin <= 0" family.
struct Worst {
  CheckResult r;
  explicit Worst(std::string name) {
    r.name = std::move(name);
    r.passed = true;
    r.worst_margin = -std::numeric_limits<double>::infinity();
  }
  void add(double margin, double slack, int step) {
    if (margin > r.worst_margin) {
      r.worst_margin = margin;
      r.worst_step = step;
    }
    if (!(margin <= slack)) r.passed = false;
  }
  CheckResult done() {
    if (r.worst_step < 0) r.worst_margin = 0.0;
    return r;
  }
};

}  // namespace

GuaranteeReport verify_guarantees(const ClosedLoopTrace& trace, const ConstraintBox& box,
                                  const GuaranteeBounds& bounds) {
  GuaranteeReport rep;
  rep.bounds = bounds;
  const int T = static_cast<int>(trace.values.size()) - 1;
  const double k10 = 10.0 * trace.kkt_tolerance;
  // Below |V| = kkt_tolerance the solver stops on an absolute residual, so
  // the slack keeps that floor.
  const double floor = trace.kkt_tolerance;
  auto slack = [&](int t) {
    return k10 * std::max({std::abs(trace.values[t]), std::abs(trace.values[t + 1]), floor});
  };

  Worst descent("descent"), monotone("monotone"), sandwich("sandwich");
  for (int t = 0; t < T; ++t) {
    const double dv = trace.values[t + 1] - trace.values[t];
    descent.add(dv + bounds.eps * trace.stage_costs[t], slack(t), t);
    monotone.add(dv, slack(t), t);
  }
  for (int t = 0; t <= T; ++t) {
    const double V = trace.values[t];
    const double lmin = trace.state_costs_min[t];
    const double tol = k10 * std::max(std::abs(V), floor);
    sandwich.add(lmin - V, tol, t);
    sandwich.add(V - bounds.gamma_bound * lmin, tol, t);
  }

  Worst perf("performance");
  if (T >= 0) {
    if (bounds.eps > 0.0) {
      double sum = 0.0;
      const double bound = trace.values[0] / bounds.eps;
      for (int t = 0; t < T; ++t) {
        sum += trace.stage_costs[t];
        perf.add(sum - bound, k10 * bound, t);
      }
    } else {
      perf.add(std::numeric_limits<double>::infinity(), 0.0, 0);
    }
  }

  Worst conv("convergence");
  if (T >= 0) {
    const double l0 = trace.state_costs_min.front();
    const double lT = trace.state_costs_min[T];
    if (l0 == 0.0) {
      conv.add(lT, 0.0, T);
    } else {
      conv.add(lT - 1e-6 * l0, 0.0, T);
      if (!(lT < 1e-6 * l0)) conv.r.passed = false;
    }
  }

  Worst cons("constraints");
  for (int t = 0; t < static_cast<int>(trace.inputs.size()); ++t) {
    cons.add(box.state_violation(trace.states[t]), 0.0, t);
    const Vector& u = trace.inputs[t];
    cons.add(std::max((u - box.u_hi()).maxCoeff(), (box.u_lo() - u).maxCoeff()), 0.0, t);
  }

  Worst solver("solver");
  for (int t = 0; t < static_cast<int>(trace.statuses.size()); ++t) {
    solver.add(trace.statuses[t] == SolveStatus::optimal ? 0.0 : 1.0, 0.0, t);
  }
  if (trace.failure) solver.add(1.0, 0.0, trace.failure->step);

  rep.checks = {descent.done(), perf.done(),  sandwich.done(), monotone.done(),
                conv.done(),    cons.done(),  solver.done()};
  return rep;
}

GuaranteeReport verify_guarantees(const ClosedLoopTrace& trace, const ConstraintBox& box,
                                  const HorizonCertificate& cert) {
  return verify_guarantees(trace, box, GuaranteeBounds{cert.eps_NM, cert.gamma_Vbar, "certificate"});
}

void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace) {
  const int n = trace.states.empty() ? 0 : static_cast<int>(trace.states.front().size());
  const int m = trace.inputs.empty() ? 0 : static_cast<int>(trace.inputs.front().size());
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",x_" << i;
  for (int j = 1; j <= m; ++j) os << ",u_" << j;
  os << ",stage_cost,value,decrease_margin,solver_status,solver_iters,kkt_residual,penalty\n";
  os << std::setprecision(17);
  for (std::size_t t = 0; t < trace.values.size(); ++t) {
    os << trace.times[t];
    for (int i = 0; i < n; ++i) os << ',' << trace.states[t](i);
    const bool has_step = t < trace.inputs.size();
    for (int j = 0; j < m; ++j) {
      os << ',';
      if (has_step) os << trace.inputs[t](j);
    }
    os << ',';
    if (has_step) os << trace.stage_costs[t];
    os << ',' << trace.values[t] << ',';
    if (t < trace.decrease_margins.size()) os << trace.decrease_margins[t];
    os << ',' << to_string(trace.statuses[t]) << ',' << trace.iterations[t] << ','
       << trace.kkt_residuals[t] << ',' << trace.penalties[t] << '\n';
  }
}

void write_plot_csv(std::ostream& os, const ClosedLoopTrace& trace, const ConstraintBox& box,
                    const Vector& x_s, const Vector& u_s, double sample_time) {
  const int n = box.state_dim();
  const int m = box.input_dim();
  os << "time_s";
  for (int i = 1; i <= n; ++i) os << ",x_" << i << ",x_" << i << "_s";
  for (int j = 1; j <= m; ++j) os << ",u_" << j << ",u_" << j << "_s";
  os << ",x_lo,x_hi,u_lo,u_hi\n";
  os << std::setprecision(12);
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    os << sample_time * trace.times[t];
    for (int i = 0; i < n; ++i) os << ',' << trace.states[t](i) << ',' << x_s(i);
    for (int j = 0; j < m; ++j) {
      os << ',';
      if (t < trace.inputs.size()) os << trace.inputs[t](j);
      os << ',' << u_s(j);
    }
    os << ',' << box.x_lo().minCoeff() << ',' << box.x_hi().maxCoeff() << ','
       << box.u_lo().minCoeff() << ',' << box.u_hi().maxCoeff() << '\n';
  }
}

}  // namespace ftmpc
