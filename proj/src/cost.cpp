#include "ftmpc/cost.hpp"

#include "ftmpc/errors.hpp"

namespace ftmpc {

QuadraticStageCost::QuadraticStageCost(Vector x_s, Vector u_s, Vector q_diag, Vector r_diag)
    : x_s_(std::move(x_s)), u_s_(std::move(u_s)), q_(std::move(q_diag)), r_(std::move(r_diag)) {
  if (x_s_.size() != q_.size() || u_s_.size() != r_.size()) {
    throw DomainError("stage cost weight dimensions do not match the setpoint");
  }
  if (!x_s_.allFinite() || !u_s_.allFinite()) throw DomainError("setpoint must be finite");
  if (!(q_.array() > 0.0).all() || !q_.allFinite()) throw DomainError("Q diagonal must be positive");
  if (!(r_.array() > 0.0).all() || !r_.allFinite()) throw DomainError("R diagonal must be positive");
}

namespace {

void check_state(const QuadraticStageCost& c, const Vector& x) {
  if (x.size() != c.state_dim()) throw DomainError("state dimension mismatch in stage cost");
}

void check_input(const QuadraticStageCost& c, const Vector& u) {
  if (u.size() != c.input_dim()) throw DomainError("input dimension mismatch in stage cost");
}

}  // namespace

double state_cost(const QuadraticStageCost& c, const Vector& x) {
  check_state(c, x);
  return (x - c.x_s()).cwiseAbs2().dot(c.q_diag());
}

double stage_cost(const QuadraticStageCost& c, const Vector& x, const Vector& u) {
  check_input(c, u);
  return state_cost(c, x) + (u - c.u_s()).cwiseAbs2().dot(c.r_diag());
}

double stage_cost_min(const QuadraticStageCost& c, const ConstraintBox& box, const Vector& x) {
  if (box.input_dim() != c.input_dim()) throw DomainError("input dimension mismatch in stage cost");
  const Vector u_best = box.clip_input(c.u_s());
  return state_cost(c, x) + (u_best - c.u_s()).cwiseAbs2().dot(c.r_diag());
}

Vector stage_cost_state_gradient(const QuadraticStageCost& c, const Vector& x) {
  check_state(c, x);
  return 2.0 * c.q_diag().cwiseProduct(x - c.x_s());
}

Vector stage_cost_input_gradient(const QuadraticStageCost& c, const Vector& u) {
  check_input(c, u);
  return 2.0 * c.r_diag().cwiseProduct(u - c.u_s());
}

}  // namespace ftmpc
