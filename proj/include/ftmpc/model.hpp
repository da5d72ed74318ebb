#pragma once

#include <array>
#include <functional>

#include <Eigen/Dense>

namespace ftmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Box-shaped state and input constraint set Z = X x U.
class ConstraintBox {
 public:
  /// Throws DomainError unless lo < hi componentwise and dimensions agree.
  ConstraintBox(Vector x_lo, Vector x_hi, Vector u_lo, Vector u_hi);

  const Vector& x_lo() const { return x_lo_; }
  const Vector& x_hi() const { return x_hi_; }
  const Vector& u_lo() const { return u_lo_; }
  const Vector& u_hi() const { return u_hi_; }
  int state_dim() const { return static_cast<int>(x_lo_.size()); }
  int input_dim() const { return static_cast<int>(u_lo_.size()); }

  bool contains_state(const Vector& x, double tol = 0.0) const;
  bool contains_input(const Vector& u, double tol = 0.0) const;
  bool contains(const Vector& x, const Vector& u, double tol = 0.0) const {
    return contains_state(x, tol) && contains_input(u, tol);
  }

  /// Largest componentwise excursion of x outside [x_lo, x_hi] (0 inside).
  double state_violation(const Vector& x) const;

  Vector clip_input(const Vector& u) const;

  /// Same box with the state bounds pulled inward by `margin`.
  ConstraintBox with_tightened_states(double margin) const;

 private:
  Vector x_lo_, x_hi_, u_lo_, u_hi_;
};

struct Jacobians {
  Matrix A;  // df/dx
  Matrix B;  // df/du
};

using TransitionMap = std::function<Vector(const Vector&, const Vector&)>;
using JacobianMap = std::function<Jacobians(const Vector&, const Vector&)>;

/// Discrete-time plant x+ = f(x, u) with its constraint box and a declared
/// equilibrium (x_eq, u_eq). Immutable after construction.
class DiscreteSystem {
 public:
  static constexpr double kEquilibriumTolerance = 1e-10;

  /// Validates f(x_eq, u_eq) = x_eq within kEquilibriumTolerance and that the
  /// equilibrium lies strictly inside the box. `jacobian` is optional; without
  /// it Jacobians come from central differences.
  DiscreteSystem(TransitionMap f, ConstraintBox box, Vector x_eq, Vector u_eq,
                 JacobianMap jacobian = {});

  int state_dim() const { return box_.state_dim(); }
  int input_dim() const { return box_.input_dim(); }
  const ConstraintBox& box() const { return box_; }
  const Vector& x_eq() const { return x_eq_; }
  const Vector& u_eq() const { return u_eq_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }

  Vector step(const Vector& x, const Vector& u) const { return f_(x, u); }
  Jacobians jacobians(const Vector& x, const Vector& u) const;

 private:
  TransitionMap f_;
  ConstraintBox box_;
  Vector x_eq_, u_eq_;
  JacobianMap jacobian_;
};

/// Central-difference Jacobians of sys.step at (x, u), step
/// h = max(1e-6, 1e-6 |coordinate|). Throws LinearizationError on non-finite
/// evaluations.
Jacobians linearize(const DiscreteSystem& sys, const Vector& x, const Vector& u);

/// Quadruple-tank parameters in cm, cm^2 and s.
struct FourTankParams {
  std::array<double, 4> A{};  // tank cross-sections
  std::array<double, 4> a{};  // outlet cross-sections
  std::array<double, 2> b{};  // valve splits
  double g = 981.0;
  double Ts = 3.0;

  /// Strict physical invariants: everything positive, b in (0, 1), Ts > 0.
  void validate() const;
};

/// Continuous-time level dynamics. Square roots are taken of max(x_i, 0).
Vector four_tank_vector_field(const FourTankParams& p, const Vector& x,
                              const Vector& u);

/// d(xdot)/dx and d(xdot)/du. The sqrt derivative is 0 for x_i <= 0.
Jacobians four_tank_vector_field_jacobian(const FourTankParams& p,
                                          const Vector& x);

/// Explicit Euler step x+ = max(x + Ts * xdot, 0) with analytic Jacobians.
///
/// Only finiteness and sign requirements are enforced here (a_i >= 0,
/// b_j in [0, 1], Ts >= 0) so that degenerate configurations remain
/// representable; configs are checked with FourTankParams::validate().
DiscreteSystem euler_discretize(const FourTankParams& p, const ConstraintBox& box,
                                const Vector& x_s, const Vector& u_s);

/// Steady-state levels produced by a constant inflow u_s.
Vector four_tank_equilibrium_levels(const FourTankParams& p, const Vector& u_s);

double spectral_radius(const Matrix& A);

}  // namespace ftmpc
