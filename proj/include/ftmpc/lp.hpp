#pragma once

#include "ftmpc/model.hpp"

namespace ftmpc {

/// maximize c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
/// Either constraint block may be empty (zero rows).
struct LinearProgram {
  Vector c;
  Matrix A_ub;
  Vector b_ub;
  Matrix A_eq;
  Vector b_eq;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpOptions {
  double tolerance = 1e-11;
  int max_iterations = 10000;
};

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Vector x;
  double objective = 0.0;
  int iterations = 0;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule. The final
/// basic solution is recomputed from the original data for accuracy.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& options = {});

const char* to_string(LpStatus status);

}  // namespace ftmpc
