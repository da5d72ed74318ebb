#pragma once

#include "ftmpc/model.hpp"

namespace ftmpc {

/// Tracking cost l(x, u) = |x - x_s|_Q^2 + |u - u_s|_R^2 with diagonal,
/// strictly positive weights. Callers pass physical coordinates; everything
/// is evaluated on the shifted deviations.
class QuadraticStageCost {
 public:
  QuadraticStageCost(Vector x_s, Vector u_s, Vector q_diag, Vector r_diag);

  const Vector& x_s() const { return x_s_; }
  const Vector& u_s() const { return u_s_; }
  const Vector& q_diag() const { return q_; }
  const Vector& r_diag() const { return r_; }
  Matrix Q() const { return q_.asDiagonal(); }
  Matrix R() const { return r_.asDiagonal(); }
  int state_dim() const { return static_cast<int>(x_s_.size()); }
  int input_dim() const { return static_cast<int>(u_s_.size()); }

 private:
  Vector x_s_, u_s_, q_, r_;
};

double stage_cost(const QuadraticStageCost& c, const Vector& x, const Vector& u);

/// inf over u in U of l(x, u). Closed form because R is diagonal and U a box:
/// the minimizer is u_s clipped into the box.
double stage_cost_min(const QuadraticStageCost& c, const ConstraintBox& box,
                      const Vector& x);

/// State-only part |x - x_s|_Q^2.
double state_cost(const QuadraticStageCost& c, const Vector& x);

/// dl/dx.
Vector stage_cost_state_gradient(const QuadraticStageCost& c, const Vector& x);
/// dl/du.
Vector stage_cost_input_gradient(const QuadraticStageCost& c, const Vector& u);

}  // namespace ftmpc
