#include "ftmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ftmpc/errors.hpp"

namespace ftmpc {

void SolverSettings::validate() const {
  if (max_iterations < 1) throw DomainError("solver max_iterations must be at least 1");
  if (!(kkt_tolerance > 0.0)) throw DomainError("solver kkt_tolerance must be positive");
  if (!(constraint_tolerance > 0.0)) {
    throw DomainError("solver constraint_tolerance must be positive");
  }
  if (!(penalty_init > 0.0)) throw DomainError("solver penalty_init must be positive");
  if (!(penalty_growth > 1.0)) throw DomainError("solver penalty_growth must exceed 1");
  if (max_penalty_updates < 0) throw DomainError("solver max_penalty_updates must be >= 0");
}

void MpcConfig::validate() const {
  if (N < 1) throw DomainError("prediction horizon N must be at least 1");
  if (M < 1) throw DomainError("tail horizon M must be at least 1");
  solver.validate();
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

void MpcProblem::validate() const {
  config.validate();
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  if (cost.state_dim() != n || cost.input_dim() != m) {
    throw DomainError("stage cost dimensions do not match the system");
  }
  if (kappa.K().rows() != m || kappa.K().cols() != n) {
    throw DomainError("tail gain dimensions do not match the system");
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
/// Relative merit increase tolerated by the approximate Wolfe test.
constexpr double kFlatTolerance = 1e-10;

/// Multipliers and weight of the augmented Lagrangian on the state box.
struct Penalty {
  ConstraintBox box;  // tightened state box
  Vector lambda;      // two entries per state component per constrained step
  double mu = 0.0;
};

struct Evaluation {
  double cost = 0.0;
  double merit = 0.0;
  Vector gradient;  // d merit / du, stacked
  std::vector<Vector> states;
  Vector constraints;      // g <= 0 form, same layout as Penalty::lambda
  double violation = 0.0;  // max(0, max g)
  bool tail_feasible = false;
  Matrix hessian;  // Gauss-Newton model of d2 merit / du2, when requested
};

// States x(1) .. x(N + M - 1) are constrained; x(0) is data and x(N + M)
// only enters through the dynamics.
int constrained_steps(const MpcConfig& c) { return c.N + c.M - 1; }

Evaluation evaluate(const MpcProblem& p, const Vector& x0, const std::vector<Vector>& u,
                    const Penalty* pen, bool want_hessian = false) {
  const int N = p.config.N;
  const int M = p.config.M;
  const int n = p.sys.state_dim();
  const int m = p.sys.input_dim();
  const int T = N + M;

  Evaluation ev;
  ev.states.resize(T + 1);
  std::vector<Vector> inputs(T);
  std::vector<Jacobians> jac(T);
  std::vector<Matrix> kappa_jac(M);
  ev.states[0] = x0;
  for (int k = 0; k < T; ++k) {
    const Vector& x = ev.states[k];
    if (k < N) {
      inputs[k] = u[k];
    } else {
      inputs[k] = p.kappa(x);
      kappa_jac[k - N] = p.kappa.jacobian(x);
    }
    jac[k] = p.sys.jacobians(x, inputs[k]);
    ev.states[k + 1] = p.sys.step(x, inputs[k]);
    if (!ev.states[k + 1].allFinite()) throw RolloutError("non-finite predicted state", k + 1);
  }

  ev.tail_feasible = true;
  for (int k = N; k < T; ++k) {
    if (!p.sys.box().contains_state(ev.states[k])) ev.tail_feasible = false;
  }

  for (int k = 0; k < T; ++k) ev.cost += stage_cost(p.cost, ev.states[k], inputs[k]);
  ev.merit = ev.cost;

  // Penalty gradient with respect to each constrained state.
  std::vector<Vector> pen_grad(T + 1, Vector::Zero(n));
  const int S_steps = constrained_steps(p.config);
  ev.constraints.resize(2 * n * S_steps);
  const ConstraintBox& cbox = pen ? pen->box : p.sys.box();
  for (int s = 1; s <= S_steps; ++s) {
    const Vector& x = ev.states[s];
    for (int i = 0; i < n; ++i) {
      const int up = (s - 1) * 2 * n + i;
      const int lo = up + n;
      ev.constraints(up) = x(i) - cbox.x_hi()(i);
      ev.constraints(lo) = cbox.x_lo()(i) - x(i);
      if (!pen) continue;
      for (int idx : {up, lo}) {
        const double lam = pen->lambda(idx);
        const double shifted = lam + pen->mu * ev.constraints(idx);
        if (shifted > 0.0) {
          ev.merit += (shifted * shifted - lam * lam) / (2.0 * pen->mu);
          pen_grad[s](i) += idx == up ? shifted : -shifted;
        } else {
          ev.merit -= lam * lam / (2.0 * pen->mu);
        }
      }
    }
  }
  ev.violation = std::max(0.0, ev.constraints.size() ? ev.constraints.maxCoeff() : 0.0);

  if (want_hessian) {
    // Forward sensitivities S = dx(k)/du. The stage cost is a weighted sum of
    // squares, so 2 J'J (plus mu dg dg' for active penalty rows) models the
    // curvature up to the second derivatives of f.
    const int nv = N * m;
    ev.hessian = Matrix::Zero(nv, nv);
    Matrix S = Matrix::Zero(n, nv);
    const Vector q = p.cost.q_diag();
    const Vector r = p.cost.r_diag();
    for (int k = 0; k < T; ++k) {
      if (k > 0) ev.hessian.noalias() += 2.0 * S.transpose() * q.asDiagonal() * S;
      if (pen && k >= 1 && k <= S_steps) {
        for (int i = 0; i < n; ++i) {
          const int up = (k - 1) * 2 * n + i;
          for (int idx : {up, up + n}) {
            if (pen->lambda(idx) + pen->mu * ev.constraints(idx) > 0.0) {
              ev.hessian.noalias() += pen->mu * S.row(i).transpose() * S.row(i);
            }
          }
        }
      }
      Matrix dU;  // d(input k)/du
      if (k < N) {
        dU = Matrix::Zero(m, nv);
        dU.middleCols(k * m, m).setIdentity();
      } else {
        dU = kappa_jac[k - N] * S;
      }
      ev.hessian.noalias() += 2.0 * dU.transpose() * r.asDiagonal() * dU;
      S = jac[k].A * S + jac[k].B * dU;
    }
  }

  // Reverse sweep.
  ev.gradient.resize(N * m);
  Vector adj = Vector::Zero(n);  // d merit / d x(k + 1)
  for (int k = T - 1; k >= 0; --k) {
    const Vector& x = ev.states[k];
    const Vector gx = stage_cost_state_gradient(p.cost, x);
    const Vector gu = stage_cost_input_gradient(p.cost, inputs[k]);
    if (k >= N) {
      const Matrix& Kj = kappa_jac[k - N];
      const Matrix Acl = jac[k].A + jac[k].B * Kj;
      adj = gx + Kj.transpose() * gu + Acl.transpose() * adj + pen_grad[k];
    } else {
      ev.gradient.segment(k * m, m) = gu + jac[k].B.transpose() * adj;
      adj = gx + jac[k].A.transpose() * adj + pen_grad[k];
    }
  }
  return ev;
}

/// Inputs are optimized in coordinates z = (u - u_lo) / (u_hi - u_lo) so the
/// feasible set is the unit cube.
struct Scaling {
  Vector lo;     // stacked lower bounds
  Vector width;  // stacked widths

  Scaling(const ConstraintBox& box, int N) {
    const int m = box.input_dim();
    lo.resize(N * m);
    width.resize(N * m);
    for (int k = 0; k < N; ++k) {
      lo.segment(k * m, m) = box.u_lo();
      width.segment(k * m, m) = box.u_hi() - box.u_lo();
    }
  }

  std::vector<Vector> to_inputs(const Vector& z, int m) const {
    const Vector u = lo + width.cwiseProduct(z);
    std::vector<Vector> out(u.size() / m);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = u.segment(k * m, m);
    return out;
  }

  Vector from_inputs(const std::vector<Vector>& u) const {
    Vector flat(lo.size());
    const Eigen::Index m = u.empty() ? 0 : u.front().size();
    for (std::size_t k = 0; k < u.size(); ++k) flat.segment(k * m, m) = u[k];
    return ((flat - lo).cwiseQuotient(width)).cwiseMax(0.0).cwiseMin(1.0);
  }
};

double kkt_residual(const Vector& z, const Vector& g) {
  if (z.size() == 0) return 0.0;
  return ((z - g).cwiseMax(0.0).cwiseMin(1.0) - z).cwiseAbs().maxCoeff();
}

struct InnerResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

class InnerSolver {
 public:
  InnerSolver(const MpcProblem& p, const Vector& x0, const Scaling& sc, const Penalty& pen,
              std::vector<std::pair<int, double>>& history, int outer)
      : p_(p), x0_(x0), sc_(sc), pen_(pen), history_(history), outer_(outer) {}

  std::optional<Evaluation> try_eval(const Vector& z) const {
    try {
      return evaluate(p_, x0_, sc_.to_inputs(z, p_.sys.input_dim()), &pen_, true);
    } catch (const RolloutError&) {
      return std::nullopt;
    }
  }

  Vector scaled_gradient(const Evaluation& ev) const { return ev.gradient.cwiseProduct(sc_.width); }

  Matrix scaled_hessian(const Evaluation& ev) const {
    return sc_.width.asDiagonal() * ev.hessian * sc_.width.asDiagonal();
  }

  /// Projected Gauss-Newton iterations on the merit for fixed multipliers.
  InnerResult run(Vector& z, Evaluation& ev) {
    const SolverSettings& st = p_.config.solver;
    const Eigen::Index nv = z.size();
    InnerResult res;
    if (ev.hessian.size() == 0) {
      if (auto e = try_eval(z)) ev = std::move(*e);
    }
    Vector g = scaled_gradient(ev);

    for (res.iterations = 0; res.iterations < st.max_iterations; ++res.iterations) {
      res.residual = kkt_residual(z, g);
      if (res.residual <= st.kkt_tolerance * std::max(1.0, std::abs(ev.merit))) {
        res.converged = true;
        return res;
      }

      // Bounds within eps_b of being hit with an outward gradient are held
      // fixed for this step.
      const double eps_b = std::min(1e-3, res.residual);
      std::vector<int> free_idx;
      for (Eigen::Index i = 0; i < nv; ++i) {
        const bool at_lo = z(i) <= eps_b && g(i) > 0.0;
        const bool at_hi = z(i) >= 1.0 - eps_b && g(i) < 0.0;
        if (!at_lo && !at_hi) free_idx.push_back(static_cast<int>(i));
      }
      const Matrix H = scaled_hessian(ev);

      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
        Vector d = Vector::Zero(nv);
        if (attempt == 0) {
          const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
          Matrix Hf(nf, nf);
          Vector gf(nf);
          for (Eigen::Index a = 0; a < nf; ++a) {
            gf(a) = g(free_idx[a]);
            for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = H(free_idx[a], free_idx[b]);
          }
          Eigen::LDLT<Matrix> ldlt(Hf);
          Vector df = ldlt.solve(-gf);
          if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !df.allFinite() ||
              df.dot(gf) >= 0.0) {
            continue;
          }
          for (Eigen::Index a = 0; a < nf; ++a) d(free_idx[a]) = df(a);
        } else {
          const double curvature = std::max(H.diagonal().maxCoeff(), 1e-300);
          d = -g / curvature;
        }

        double t = 1.0;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
          const Vector zt = (z + t * d).cwiseMax(0.0).cwiseMin(1.0);
          const Vector s = zt - z;
          if (s.cwiseAbs().maxCoeff() == 0.0) break;
          std::optional<Evaluation> trial = try_eval(zt);
          if (!trial) continue;
          if (ev.tail_feasible && !trial->tail_feasible) continue;
          const Vector gt = scaled_gradient(*trial);
          const double slope = g.dot(s);
          const bool armijo = trial->merit <= ev.merit + 1e-4 * slope;
          // Near the minimizer merit differences drown in rounding; accept a
          // step that is flat in value but clearly reduces the slope.
          const bool approx_wolfe =
              trial->merit <= ev.merit + kFlatTolerance * std::abs(ev.merit) &&
              gt.dot(s) >= 0.9 * slope && gt.dot(s) <= -0.8 * slope;
          if (!armijo && !approx_wolfe) continue;

          z = zt;
          ev = std::move(*trial);
          g = gt;
          history_.emplace_back(outer_, ev.merit);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;  // no descent left at working precision
    }
    res.residual = kkt_residual(z, g);
    res.converged = res.residual <= st.kkt_tolerance * std::max(1.0, std::abs(ev.merit));
    return res;
  }

 private:
  const MpcProblem& p_;
  const Vector& x0_;
  const Scaling& sc_;
  const Penalty& pen_;
  std::vector<std::pair<int, double>>& history_;
  int outer_;
};

std::vector<Vector> kappa_candidate(const MpcProblem& p, const Vector& x0) {
  return rollout(p.sys, p.kappa, x0, p.config.N).inputs;
}

}  // namespace

ObjectiveEvaluation objective(const MpcProblem& problem, const Vector& x0,
                              const std::vector<Vector>& u_seq) {
  problem.validate();
  if (static_cast<int>(u_seq.size()) != problem.config.N) {
    throw DomainError("input sequence length must equal N");
  }
  for (const Vector& u : u_seq) {
    if (u.size() != problem.sys.input_dim()) throw DomainError("input dimension mismatch");
  }
  Evaluation ev = evaluate(problem, x0, u_seq, nullptr);
  ObjectiveEvaluation out;
  out.value = ev.cost;
  out.gradient = std::move(ev.gradient);
  out.states = std::move(ev.states);
  out.tail_feasible = ev.tail_feasible;
  return out;
}

MpcSolution solve(const MpcProblem& problem, const Vector& x0,
                  const std::optional<std::vector<Vector>>& warm) {
  problem.validate();
  if (x0.size() != problem.sys.state_dim() || !x0.allFinite()) {
    throw DomainError("initial state must be finite with the system's dimension");
  }
  const SolverSettings& st = problem.config.solver;
  const int N = problem.config.N;
  const int n = problem.sys.state_dim();
  const int m = problem.sys.input_dim();
  const Scaling sc(problem.sys.box(), N);

  Penalty pen{problem.sys.box().with_tightened_states(st.constraint_tolerance),
              Vector::Zero(2 * n * constrained_steps(problem.config)), st.penalty_init};

  MpcSolution sol;

  // Initial guess: the kappa rollout, replaced by the warm start when better.
  Vector z = sc.from_inputs(kappa_candidate(problem, x0));
  Evaluation ev = evaluate(problem, x0, sc.to_inputs(z, m), &pen);
  if (warm) {
    if (static_cast<int>(warm->size()) != N) throw DomainError("warm start length must equal N");
    const Vector zw = sc.from_inputs(*warm);
    try {
      Evaluation ew = evaluate(problem, x0, sc.to_inputs(zw, m), &pen);
      const bool better = (ew.tail_feasible && !ev.tail_feasible) ||
                          (ew.tail_feasible == ev.tail_feasible && ew.merit < ev.merit);
      if (better) {
        z = zw;
        ev = std::move(ew);
      }
    } catch (const RolloutError&) {
    }
  }

  SolveStatus status = SolveStatus::infeasible;
  double prev_violation = kInf;
  const bool x0_feasible = problem.sys.box().contains_state(x0);
  for (int outer = 0; outer <= st.max_penalty_updates; ++outer) {
    InnerSolver inner(problem, x0, sc, pen, sol.merit_history, outer);
    const InnerResult res = inner.run(z, ev);
    sol.iterations += res.iterations;
    sol.kkt_residual = res.residual;
    sol.penalty = pen.mu;

    if (ev.violation <= st.constraint_tolerance) {
      status = res.converged ? SolveStatus::optimal : SolveStatus::max_iter;
      break;
    }
    if (outer == st.max_penalty_updates) break;
    pen.lambda = (pen.lambda + pen.mu * ev.constraints).cwiseMax(0.0);
    if (ev.violation > 0.25 * prev_violation) pen.mu *= st.penalty_growth;
    prev_violation = ev.violation;
    ev = evaluate(problem, x0, sc.to_inputs(z, m), &pen);
  }
  if (!x0_feasible) status = SolveStatus::infeasible;

  sol.u_seq = sc.to_inputs(z, m);
  sol.x_seq.assign(ev.states.begin(), ev.states.begin() + N + 1);
  sol.constraint_violation = std::max(0.0, ev.violation - st.constraint_tolerance);
  sol.tail = finite_tail_cost(problem.sys, problem.cost, problem.kappa, sol.x_seq[N],
                              problem.config.M);
  if (status != SolveStatus::infeasible && !sol.tail.feasible()) status = SolveStatus::infeasible;
  sol.status = status;
  if (status == SolveStatus::infeasible) {
    sol.value = kInf;
  } else {
    double v = *sol.tail.value;
    for (int k = 0; k < N; ++k) v += stage_cost(problem.cost, sol.x_seq[k], sol.u_seq[k]);
    sol.value = v;
  }
  return sol;
}

MpcSolver::MpcSolver(MpcProblem problem) : problem_(std::move(problem)) { problem_.validate(); }

MpcSolution MpcSolver::solve(const Vector& x0) {
  std::optional<std::vector<Vector>> warm;
  if (problem_.config.solver.warm_start && previous_ &&
      previous_->status != SolveStatus::infeasible) {
    const int N = problem_.config.N;
    std::vector<Vector> shifted(previous_->u_seq.begin() + 1, previous_->u_seq.end());
    shifted.push_back(problem_.kappa(previous_->x_seq[N]));
    warm = std::move(shifted);
  }
  MpcSolution sol = ftmpc::solve(problem_, x0, warm);
  previous_ = sol;
  return sol;
}

}  // namespace ftmpc
