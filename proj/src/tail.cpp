#include "ftmpc/tail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ftmpc/errors.hpp"

namespace ftmpc {

namespace {

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P) {
  const Matrix S = R + B.transpose() * P * B;
  return S.ldlt().solve(B.transpose() * P * A);
}

Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                   const Matrix& P) {
  const Matrix PA = P * A;
  const Matrix BtPA = B.transpose() * PA;
  const Matrix S = R + B.transpose() * P * B;
  Matrix next = Q + A.transpose() * PA - BtPA.transpose() * S.ldlt().solve(BtPA);
  return 0.5 * (next + next.transpose());
}

}  // namespace

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P) {
  return (riccati_map(A, B, Q, R, P) - P).lpNorm<Eigen::Infinity>();
}

DareSolution dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        const DareOptions& options) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw DomainError("dare_solve: inconsistent matrix dimensions");
  }
  if (R.llt().info() != Eigen::Success) {
    throw DomainError("dare_solve: R must be positive definite");
  }

  Matrix P = Q;
  Matrix best = P;
  double best_change = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iterations; ++it) {
    Matrix next = riccati_map(A, B, Q, R, P);
    if (!next.allFinite()) break;
    const double change = (next - P).lpNorm<Eigen::Infinity>();
    P = std::move(next);
    if (change < best_change) {
      best_change = change;
      best = P;
    }
    if (change < options.tolerance * std::max(1.0, P.lpNorm<Eigen::Infinity>())) {
      DareSolution sol;
      sol.K = lqr_gain(A, B, R, P);
      sol.P = std::move(P);
      sol.iterations = it;
      sol.residual = dare_residual(A, B, Q, R, sol.P);
      return sol;
    }
  }
  const double rho = spectral_radius(A - B * lqr_gain(A, B, R, best));
  throw SynthesisError("Riccati iteration did not converge (best closed-loop spectral radius " +
                           std::to_string(rho) + ")",
                       rho);
}

TailController::TailController(Matrix K, Vector x_s, Vector u_s, Vector u_lo, Vector u_hi)
    : K_(std::move(K)),
      x_s_(std::move(x_s)),
      u_s_(std::move(u_s)),
      u_lo_(std::move(u_lo)),
      u_hi_(std::move(u_hi)) {
  if (K_.rows() != u_s_.size() || K_.cols() != x_s_.size() || u_lo_.size() != u_s_.size() ||
      u_hi_.size() != u_s_.size()) {
    throw DomainError("tail controller dimensions are inconsistent");
  }
  if (!K_.allFinite()) throw DomainError("tail gain must be finite");
  if (!(u_lo_.array() < u_hi_.array()).all()) {
    throw DomainError("tail saturation bounds must satisfy u_lo < u_hi");
  }
}

Vector TailController::unsaturated(const Vector& x) const { return u_s_ - K_ * (x - x_s_); }

Vector TailController::operator()(const Vector& x) const {
  return unsaturated(x).cwiseMax(u_lo_).cwiseMin(u_hi_);
}

Matrix TailController::jacobian(const Vector& x) const {
  const Vector raw = unsaturated(x);
  Matrix J = -K_;
  for (Eigen::Index j = 0; j < raw.size(); ++j) {
    if (raw(j) < u_lo_(j) || raw(j) > u_hi_(j)) J.row(j).setZero();
  }
  return J;
}

TailController lqr_tail_controller(const DiscreteSystem& sys, const QuadraticStageCost& cost) {
  const Jacobians lin = linearize(sys, sys.x_eq(), sys.u_eq());
  const DareSolution dare = dare_solve(lin.A, lin.B, cost.Q(), cost.R());
  return fixed_gain_tail_controller(sys, dare.K);
}

TailController fixed_gain_tail_controller(const DiscreteSystem& sys, Matrix K) {
  return TailController(std::move(K), sys.x_eq(), sys.u_eq(), sys.box().u_lo(), sys.box().u_hi());
}

Rollout rollout(const DiscreteSystem& sys, const TailController& kappa, const Vector& x,
                int horizon) {
  if (horizon < 0) throw DomainError("rollout horizon must be non-negative");
  if (!x.allFinite()) throw RolloutError("non-finite initial state", 0);
  Rollout r;
  r.states.reserve(horizon + 1);
  r.inputs.reserve(horizon);
  r.states.push_back(x);
  for (int k = 0; k < horizon; ++k) {
    r.inputs.push_back(kappa(r.states.back()));
    Vector next = sys.step(r.states.back(), r.inputs.back());
    if (!next.allFinite()) {
      throw RolloutError("non-finite state at rollout step " + std::to_string(k + 1), k + 1);
    }
    r.states.push_back(std::move(next));
  }
  return r;
}

TailEvaluation finite_tail_cost(const DiscreteSystem& sys, const QuadraticStageCost& cost,
                                const TailController& kappa, const Vector& x, int M,
                                double tolerance) {
  if (M < 1) throw DomainError("tail horizon M must be at least 1");
  Rollout r = rollout(sys, kappa, x, M);
  TailEvaluation ev;
  ev.per_step_costs.reserve(M);
  double sum = 0.0;
  for (int k = 0; k < M; ++k) {
    const double l = stage_cost(cost, r.states[k], r.inputs[k]);
    ev.per_step_costs.push_back(l);
    sum += l;
    if (!ev.first_violation && !sys.box().contains(r.states[k], r.inputs[k], tolerance)) {
      ev.first_violation = k;
    }
  }
  if (!ev.first_violation) ev.value = sum;
  ev.states = std::move(r.states);
  ev.inputs = std::move(r.inputs);
  return ev;
}

}  // namespace ftmpc
