#pragma once

#include <optional>
#include <vector>

#include "ftmpc/cost.hpp"
#include "ftmpc/model.hpp"

namespace ftmpc {

struct DareOptions {
  double tolerance = 1e-12;  // max-norm change between iterates, relative to max(1, |P|)
  int max_iterations = 100000;
};

struct DareSolution {
  Matrix P;
  Matrix K;  // u = -K x
  int iterations = 0;
  double residual = 0.0;  // max-norm DARE residual of P
};

/// Solves P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA by fixed-point iteration
/// from P = Q. Throws SynthesisError if the iteration does not settle.
DareSolution dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        const DareOptions& options = {});

/// Max-norm residual of the discrete algebraic Riccati equation at P.
double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P);

/// Saturated linear feedback kappa(x) = clip(u_s - K (x - x_s), u_lo, u_hi).
class TailController {
 public:
  TailController(Matrix K, Vector x_s, Vector u_s, Vector u_lo, Vector u_hi);

  Vector operator()(const Vector& x) const;
  /// The affine law before clipping.
  Vector unsaturated(const Vector& x) const;
  /// d kappa / dx: -K with the rows of saturated channels zeroed.
  Matrix jacobian(const Vector& x) const;

  const Matrix& K() const { return K_; }
  const Vector& x_s() const { return x_s_; }
  const Vector& u_s() const { return u_s_; }
  const Vector& u_lo() const { return u_lo_; }
  const Vector& u_hi() const { return u_hi_; }

 private:
  Matrix K_;
  Vector x_s_, u_s_, u_lo_, u_hi_;
};

/// LQR on the linearization at the plant's declared equilibrium, saturated to
/// the input box.
TailController lqr_tail_controller(const DiscreteSystem& sys, const QuadraticStageCost& cost);

/// Tail controller with a user-supplied gain.
TailController fixed_gain_tail_controller(const DiscreteSystem& sys, Matrix K);

struct Rollout {
  std::vector<Vector> states;  // horizon + 1 entries, states[0] = x
  std::vector<Vector> inputs;  // horizon entries
};

/// Closed-loop response of kappa from x. Throws RolloutError at the first
/// non-finite state.
Rollout rollout(const DiscreteSystem& sys, const TailController& kappa, const Vector& x,
                int horizon);

struct TailEvaluation {
  /// Sum of per-step costs, or empty when some (state, input) pair leaves Z.
  std::optional<double> value;
  std::vector<Vector> states;  // M + 1
  std::vector<Vector> inputs;  // M
  std::vector<double> per_step_costs;
  std::optional<int> first_violation;

  bool feasible() const { return value.has_value(); }
};

/// Finite-tail cost V_{f,M}(x). `tolerance` widens the state box for the
/// membership test (0 means exact membership).
TailEvaluation finite_tail_cost(const DiscreteSystem& sys, const QuadraticStageCost& cost,
                                const TailController& kappa, const Vector& x, int M,
                                double tolerance = 0.0);

}  // namespace ftmpc
