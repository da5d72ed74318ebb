#include "ftmpc/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "ftmpc/errors.hpp"

namespace ftmpc {

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

// Tableau layout: rows 0..m-1 are constraints, last row is the reduced-cost
// row of the current phase objective (maximization form: we pick columns with
// positive reduced cost). Last column is the right-hand side.
class Tableau {
 public:
  Tableau(Matrix T, std::vector<int> basis) : T_(std::move(T)), basis_(std::move(basis)) {}

  int rows() const { return static_cast<int>(T_.rows()) - 1; }
  int cols() const { return static_cast<int>(T_.cols()) - 1; }
  Matrix& data() { return T_; }
  std::vector<int>& basis() { return basis_; }

  void set_objective(const Vector& c) {
    // Reduced costs r_j = c_j - c_B' B^-1 a_j for the current basis.
    T_.row(rows()).setZero();
    T_.row(rows()).head(c.size()) = c.transpose();
    for (int i = 0; i < rows(); ++i) {
      const double cb = basis_[i] < c.size() ? c(basis_[i]) : 0.0;
      if (cb != 0.0) T_.row(rows()) -= cb * T_.row(i);
    }
  }

  LpStatus run(int usable_cols, const LpOptions& opt, int& iterations) {
    while (true) {
      if (iterations >= opt.max_iterations) return LpStatus::iteration_limit;
      int enter = -1;
      for (int j = 0; j < usable_cols; ++j) {
        if (T_(rows(), j) > opt.tolerance) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return LpStatus::optimal;

      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows(); ++i) {
        const double a = T_(i, enter);
        if (a > opt.tolerance) {
          const double ratio = T_(i, cols()) / a;
          if (ratio < best_ratio - 1e-15 ||
              (std::abs(ratio - best_ratio) <= 1e-15 && leave >= 0 && basis_[i] < basis_[leave])) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return LpStatus::unbounded;
      pivot(leave, enter);
      ++iterations;
    }
  }

  void pivot(int r, int c) {
    T_.row(r) /= T_(r, c);
    for (int i = 0; i <= rows(); ++i) {
      if (i != r && T_(i, c) != 0.0) T_.row(i) -= T_(i, c) * T_.row(r);
    }
    basis_[r] = c;
  }

 private:
  Matrix T_;
  std::vector<int> basis_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& options) {
  const int n = static_cast<int>(lp.c.size());
  const int m_ub = static_cast<int>(lp.A_ub.rows());
  const int m_eq = static_cast<int>(lp.A_eq.rows());
  if ((m_ub > 0 && (lp.A_ub.cols() != n || lp.b_ub.size() != m_ub)) ||
      (m_eq > 0 && (lp.A_eq.cols() != n || lp.b_eq.size() != m_eq))) {
    throw DomainError("solve_lp: inconsistent dimensions");
  }
  const int m = m_ub + m_eq;

  // Columns: [x (n) | slacks (m_ub) | artificials (m)] then rhs.
  const int n_slack = m_ub;
  const int art0 = n + n_slack;
  const int total = art0 + m;
  Matrix T = Matrix::Zero(m + 1, total + 1);
  Matrix A_std = Matrix::Zero(m, n + n_slack);  // original rows, for refinement
  Vector b_std(m);
  for (int i = 0; i < m_ub; ++i) {
    A_std.row(i).head(n) = lp.A_ub.row(i);
    A_std(i, n + i) = 1.0;
    b_std(i) = lp.b_ub(i);
  }
  for (int i = 0; i < m_eq; ++i) {
    A_std.row(m_ub + i).head(n) = lp.A_eq.row(i);
    b_std(m_ub + i) = lp.b_eq(i);
  }

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) {
    const double sign = b_std(i) < 0.0 ? -1.0 : 1.0;
    T.row(i).head(n + n_slack) = sign * A_std.row(i);
    T(i, total) = sign * b_std(i);
    T(i, art0 + i) = 1.0;
    basis[i] = art0 + i;
  }

  Tableau tab(std::move(T), std::move(basis));
  LpResult result;

  // Phase 1: maximize -sum(artificials).
  Vector phase1 = Vector::Zero(total);
  phase1.tail(m).setConstant(-1.0);
  tab.set_objective(phase1);
  LpStatus st = tab.run(total, options, result.iterations);
  if (st == LpStatus::iteration_limit) {
    result.status = st;
    return result;
  }
  // The rhs of the objective row is minus the phase objective, i.e. the sum
  // of the artificials.
  const double scale = 1.0 + b_std.lpNorm<Eigen::Infinity>();
  if (tab.data()(m, total) > 1e-9 * scale) {
    result.status = LpStatus::infeasible;
    return result;
  }

  // Drive degenerate artificials out of the basis where possible.
  for (int i = 0; i < m; ++i) {
    if (tab.basis()[i] >= art0) {
      for (int j = 0; j < art0; ++j) {
        if (std::abs(tab.data()(i, j)) > options.tolerance) {
          tab.pivot(i, j);
          break;
        }
      }
    }
  }

  // Phase 2 over the original and slack columns only.
  Vector phase2 = Vector::Zero(total);
  phase2.head(n) = lp.c;
  tab.set_objective(phase2);
  st = tab.run(art0, options, result.iterations);
  if (st != LpStatus::optimal) {
    result.status = st;
    return result;
  }

  // Recompute the basic solution from the original data when the basis is
  // made of real columns only; otherwise keep the tableau values.
  Vector z = Vector::Zero(n + n_slack);
  std::vector<int> real_cols;
  for (int i = 0; i < m; ++i) {
    if (tab.basis()[i] < art0) {
      real_cols.push_back(tab.basis()[i]);
      z(tab.basis()[i]) = tab.data()(i, total);
    }
  }
  if (static_cast<int>(real_cols.size()) == m) {
    Matrix Bm(m, m);
    for (int k = 0; k < m; ++k) Bm.col(k) = A_std.col(real_cols[k]);
    Eigen::FullPivLU<Matrix> lu(Bm);
    if (lu.isInvertible()) {
      const Vector zb = lu.solve(b_std);
      for (int k = 0; k < m; ++k) z(real_cols[k]) = zb(k);
    }
  }

  result.status = LpStatus::optimal;
  result.x = z.head(n).cwiseMax(0.0);
  result.objective = lp.c.dot(result.x);
  return result;
}

}  // namespace ftmpc
