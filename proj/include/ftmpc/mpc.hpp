#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ftmpc/cost.hpp"
#include "ftmpc/model.hpp"
#include "ftmpc/tail.hpp"

namespace ftmpc {

struct SolverSettings {
  int max_iterations = 500;         // inner iterations per penalty level
  double kkt_tolerance = 1e-8;      // relative to max(1, |merit|)
  double constraint_tolerance = 1e-6;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  int max_penalty_updates = 12;
  bool warm_start = true;

  /// Throws DomainError on non-positive tolerances, penalty_growth <= 1, etc.
  void validate() const;
};

struct MpcConfig {
  int N = 1;
  int M = 1;
  SolverSettings solver;

  void validate() const;
};

enum class SolveStatus { optimal, max_iter, infeasible };

const char* to_string(SolveStatus s);

/// Everything needed to pose the finite-tail MPC problem.
struct MpcProblem {
  DiscreteSystem sys;
  QuadraticStageCost cost;
  TailController kappa;
  MpcConfig config;

  /// Checks that the dimensions of the parts agree and validates the config.
  void validate() const;
};

struct MpcSolution {
  std::vector<Vector> u_seq;  // N inputs
  std::vector<Vector> x_seq;  // N + 1 states
  /// J_{N,M} at the returned inputs; +inf when status is infeasible.
  double value = 0.0;
  TailEvaluation tail;
  SolveStatus status = SolveStatus::infeasible;
  double kkt_residual = 0.0;
  int iterations = 0;
  double penalty = 0.0;
  /// Largest excursion of x(1..N-1) and the tail states outside X.
  double constraint_violation = 0.0;
  /// Merit after every accepted step, tagged with its penalty level.
  std::vector<std::pair<int, double>> merit_history;

  bool optimal() const { return status == SolveStatus::optimal; }
};

struct ObjectiveEvaluation {
  double value = 0.0;      // stage costs plus the unconstrained tail sum
  Vector gradient;         // stacked d/du(k), k = 0 .. N-1
  std::vector<Vector> states;  // x(0) .. x(N + M)
  bool tail_feasible = false;  // tail states inside X
};

/// J_{N,M} and its gradient with respect to the stacked input sequence. The
/// tail sum is reported even when the tail leaves X (flagged by
/// tail_feasible). Inputs must already lie in U. Throws RolloutError if the
/// prediction becomes non-finite.
ObjectiveEvaluation objective(const MpcProblem& problem, const Vector& x0,
                              const std::vector<Vector>& u_seq);

/// One solve of the finite-tail MPC problem. The initial guess is the better
/// of `warm` (if given) and the sequence produced by running kappa from x0.
MpcSolution solve(const MpcProblem& problem, const Vector& x0,
                  const std::optional<std::vector<Vector>>& warm = std::nullopt);

/// Stateful solver for closed-loop use: shifts the previous minimizer and
/// appends kappa at the last predicted state to warm start the next solve.
class MpcSolver {
 public:
  explicit MpcSolver(MpcProblem problem);

  MpcSolution solve(const Vector& x0);
  void reset() { previous_.reset(); }
  const MpcProblem& problem() const { return problem_; }

 private:
  MpcProblem problem_;
  std::optional<MpcSolution> previous_;
};

}  // namespace ftmpc
