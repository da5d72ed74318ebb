#include "ftmpc/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ftmpc/errors.hpp"

namespace ftmpc {

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw DomainError(std::string(what) + " contains non-finite entries");
  }
}

}  // namespace

ConstraintBox::ConstraintBox(Vector x_lo, Vector x_hi, Vector u_lo, Vector u_hi)
    : x_lo_(std::move(x_lo)),
      x_hi_(std::move(x_hi)),
      u_lo_(std::move(u_lo)),
      u_hi_(std::move(u_hi)) {
  if (x_lo_.size() != x_hi_.size() || u_lo_.size() != u_hi_.size()) {
    throw DomainError("constraint box bound dimensions disagree");
  }
  if (x_lo_.size() == 0 || u_lo_.size() == 0) {
    throw DomainError("constraint box needs at least one state and one input");
  }
  // NaN fails both comparisons, so it is rejected here as well.
  if (!(x_lo_.array() < x_hi_.array()).all()) {
    throw DomainError("state bounds must satisfy x_lo < x_hi");
  }
  if (!(u_lo_.array() < u_hi_.array()).all()) {
    throw DomainError("input bounds must satisfy u_lo < u_hi");
  }
}

bool ConstraintBox::contains_state(const Vector& x, double tol) const {
  return ((x.array() >= x_lo_.array() - tol) && (x.array() <= x_hi_.array() + tol)).all();
}

bool ConstraintBox::contains_input(const Vector& u, double tol) const {
  return ((u.array() >= u_lo_.array() - tol) && (u.array() <= u_hi_.array() + tol)).all();
}

double ConstraintBox::state_violation(const Vector& x) const {
  const double above = (x - x_hi_).maxCoeff();
  const double below = (x_lo_ - x).maxCoeff();
  return std::max({0.0, above, below});
}

Vector ConstraintBox::clip_input(const Vector& u) const {
  return u.cwiseMax(u_lo_).cwiseMin(u_hi_);
}

ConstraintBox ConstraintBox::with_tightened_states(double margin) const {
  return ConstraintBox(x_lo_.array() + margin, x_hi_.array() - margin, u_lo_, u_hi_);
}

DiscreteSystem::DiscreteSystem(TransitionMap f, ConstraintBox box, Vector x_eq,
                               Vector u_eq, JacobianMap jacobian)
    : f_(std::move(f)),
      box_(std::move(box)),
      x_eq_(std::move(x_eq)),
      u_eq_(std::move(u_eq)),
      jacobian_(std::move(jacobian)) {
  if (!f_) throw DomainError("transition map is empty");
  if (x_eq_.size() != box_.state_dim() || u_eq_.size() != box_.input_dim()) {
    throw DomainError("equilibrium dimensions do not match the constraint box");
  }
  require_finite(x_eq_, "x_eq");
  require_finite(u_eq_, "u_eq");
  const Vector next = f_(x_eq_, u_eq_);
  if (next.size() != x_eq_.size() || !next.allFinite()) {
    throw DomainError("transition map returned an invalid state at the equilibrium");
  }
  const double residual = (next - x_eq_).lpNorm<Eigen::Infinity>();
  if (residual >= kEquilibriumTolerance) {
    throw DomainError("declared equilibrium is not a fixed point (residual " +
                      std::to_string(residual) + ")");
  }
  const bool interior =
      (x_eq_.array() > box_.x_lo().array()).all() && (x_eq_.array() < box_.x_hi().array()).all() &&
      (u_eq_.array() > box_.u_lo().array()).all() && (u_eq_.array() < box_.u_hi().array()).all();
  if (!interior) {
    throw DomainError("equilibrium must lie strictly inside the constraint box");
  }
}

Jacobians DiscreteSystem::jacobians(const Vector& x, const Vector& u) const {
  if (jacobian_) return jacobian_(x, u);
  return linearize(*this, x, u);
}

Jacobians linearize(const DiscreteSystem& sys, const Vector& x, const Vector& u) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  Jacobians jac{Matrix(n, n), Matrix(n, m)};

  auto column = [&](const Vector& xp, const Vector& up, const Vector& xm,
                    const Vector& um, double h) {
    const Vector fp = sys.step(xp, up);
    const Vector fm = sys.step(xm, um);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw LinearizationError("non-finite transition value in finite-difference stencil");
    }
    return Vector((fp - fm) / (2.0 * h));
  };

  for (int i = 0; i < n; ++i) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x(i)));
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    jac.A.col(i) = column(xp, u, xm, u, h);
  }
  for (int j = 0; j < m; ++j) {
    const double h = std::max(1e-6, 1e-6 * std::abs(u(j)));
    Vector up = u, um = u;
    up(j) += h;
    um(j) -= h;
    jac.B.col(j) = column(x, up, x, um, h);
  }
  return jac;
}

void FourTankParams::validate() const {
  for (double v : A) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("tank cross-sections must be positive");
  }
  for (double v : a) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("outlet cross-sections must be positive");
  }
  for (double v : b) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError("valve splits must lie in (0, 1)");
  }
  if (!(g > 0.0) || !std::isfinite(g)) throw DomainError("gravity must be positive");
  if (!(Ts > 0.0) || !std::isfinite(Ts)) throw DomainError("sampling time must be positive");
}

namespace {

void check_relaxed(const FourTankParams& p) {
  for (double v : p.A) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("tank cross-sections must be positive");
  }
  for (double v : p.a) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("outlet cross-sections must be non-negative");
  }
  for (double v : p.b) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("valve splits must lie in [0, 1]");
  }
  if (!(p.g >= 0.0) || !std::isfinite(p.g)) throw DomainError("gravity must be non-negative");
  if (!(p.Ts >= 0.0) || !std::isfinite(p.Ts)) throw DomainError("sampling time must be non-negative");
}

void check_dims(const Vector& x, const Vector& u) {
  if (x.size() != 4 || u.size() != 2) {
    throw DomainError("four-tank model expects 4 states and 2 inputs");
  }
}

}  // namespace

Vector four_tank_vector_field(const FourTankParams& p, const Vector& x, const Vector& u) {
  check_dims(x, u);
  require_finite(x, "state");
  require_finite(u, "input");
  const double two_g = 2.0 * p.g;
  std::array<double, 4> q{};  // outflow a_i sqrt(2 g x_i)
  for (int i = 0; i < 4; ++i) q[i] = p.a[i] * std::sqrt(two_g * std::max(x(i), 0.0));

  Vector xdot(4);
  xdot(0) = (-q[0] + q[2] + p.b[0] * u(0)) / p.A[0];
  xdot(1) = (-q[1] + q[3] + p.b[1] * u(1)) / p.A[1];
  xdot(2) = (-q[2] + (1.0 - p.b[1]) * u(1)) / p.A[2];
  xdot(3) = (-q[3] + (1.0 - p.b[0]) * u(0)) / p.A[3];
  return xdot;
}

Jacobians four_tank_vector_field_jacobian(const FourTankParams& p, const Vector& x) {
  const double two_g = 2.0 * p.g;
  std::array<double, 4> dq{};
  for (int i = 0; i < 4; ++i) {
    dq[i] = x(i) > 0.0 ? p.a[i] * two_g / (2.0 * std::sqrt(two_g * x(i))) : 0.0;
  }
  Matrix A = Matrix::Zero(4, 4);
  A(0, 0) = -dq[0] / p.A[0];
  A(0, 2) = dq[2] / p.A[0];
  A(1, 1) = -dq[1] / p.A[1];
  A(1, 3) = dq[3] / p.A[1];
  A(2, 2) = -dq[2] / p.A[2];
  A(3, 3) = -dq[3] / p.A[3];

  Matrix B = Matrix::Zero(4, 2);
  B(0, 0) = p.b[0] / p.A[0];
  B(1, 1) = p.b[1] / p.A[1];
  B(2, 1) = (1.0 - p.b[1]) / p.A[2];
  B(3, 0) = (1.0 - p.b[0]) / p.A[3];
  return {A, B};
}

DiscreteSystem euler_discretize(const FourTankParams& p, const ConstraintBox& box,
                                const Vector& x_s, const Vector& u_s) {
  check_relaxed(p);
  if (box.state_dim() != 4 || box.input_dim() != 2) {
    throw DomainError("four-tank model expects a 4-state, 2-input constraint box");
  }
  auto f = [p](const Vector& x, const Vector& u) -> Vector {
    return (x + p.Ts * four_tank_vector_field(p, x, u)).cwiseMax(0.0);
  };
  auto jac = [p](const Vector& x, const Vector& u) -> Jacobians {
    const Vector raw = x + p.Ts * four_tank_vector_field(p, x, u);
    Jacobians c = four_tank_vector_field_jacobian(p, x);
    Jacobians d{Matrix::Identity(4, 4) + p.Ts * c.A, p.Ts * c.B};
    for (int i = 0; i < 4; ++i) {
      if (raw(i) < 0.0) {  // clamped level
        d.A.row(i).setZero();
        d.B.row(i).setZero();
      }
    }
    return d;
  };
  return DiscreteSystem(f, box, x_s, u_s, jac);
}

Vector four_tank_equilibrium_levels(const FourTankParams& p, const Vector& u_s) {
  check_relaxed(p);
  if (u_s.size() != 2) throw DomainError("four-tank model expects 2 inputs");
  for (double v : p.a) {
    if (!(v > 0.0)) throw DomainError("equilibrium levels need positive outlets");
  }
  const double two_g = 2.0 * p.g;
  // Outflow of each tank at steady state, then invert q = a sqrt(2 g x).
  const double q3 = (1.0 - p.b[1]) * u_s(1);
  const double q4 = (1.0 - p.b[0]) * u_s(0);
  const double q1 = q3 + p.b[0] * u_s(0);
  const double q2 = q4 + p.b[1] * u_s(1);
  const std::array<double, 4> q{q1, q2, q3, q4};
  Vector x(4);
  for (int i = 0; i < 4; ++i) {
    const double r = q[i] / p.a[i];
    x(i) = r * r / two_g;
  }
  return x;
}

double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ftmpc
