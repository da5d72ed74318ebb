#include "ftmpc/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "ftmpc/errors.hpp"
#include "ftmpc/lp.hpp"
#include "ftmpc/parallel.hpp"

namespace ftmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_rho_C(double rho, double C) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must lie in [0, 1)");
  if (!(C >= 1.0) || !std::isfinite(C)) throw DomainError("C must be finite and at least 1");
}

}  // namespace

double gamma_k(double rho, double C, int k) {
  check_rho_C(rho, C);
  if (k < 0) throw DomainError("gamma_k needs k >= 0");
  if (k == 0) return 0.0;
  return C * (1.0 - std::pow(rho, k)) / (1.0 - rho);
}

double gamma_k(double rho, double C, InfiniteHorizon) {
  check_rho_C(rho, C);
  return C / (1.0 - rho);
}

double c_M_analytic(double rho, double C, int M) {
  check_rho_C(rho, C);
  if (M < 1) throw DomainError("c_M needs M >= 1");
  if (rho == 0.0) return 0.0;
  const double rho_M = std::pow(rho, M);
  return C * rho_M * (1.0 - rho) / (1.0 - rho_M);
}

double c_M_lp(double rho, double C, int M) {
  check_rho_C(rho, C);
  if (M < 1) throw DomainError("c_M needs M >= 1");
  // Variables l_0 .. l_{M-1} and w = l_M / (C rho^M); maximize w. In w the
  // constraints read rho^k w <= l_k, which keeps every coefficient in [0, 1]
  // where the unscaled form C rho^(M-k) underflows the pivot tolerance.
  LinearProgram lp;
  lp.c = Vector::Zero(M + 1);
  lp.c(M) = 1.0;
  lp.A_eq = Matrix::Zero(1, M + 1);
  lp.A_eq.row(0).head(M).setOnes();
  lp.b_eq = Vector::Ones(1);
  lp.A_ub = Matrix::Zero(M, M + 1);
  lp.b_ub = Vector::Zero(M);
  for (int k = 0; k < M; ++k) {
    lp.A_ub(k, M) = std::pow(rho, k);
    lp.A_ub(k, k) = -1.0;
  }
  const LpResult res = solve_lp(lp);
  if (res.status != LpStatus::optimal) {
    throw std::logic_error(std::string("c_M linear program ended with status ") +
                           to_string(res.status));
  }
  return C * std::pow(rho, M) * res.objective;
}

double m_lower_threshold(double rho, double C) {
  check_rho_C(rho, C);
  if (rho == 0.0) return 0.0;
  return std::log(C) / std::log(1.0 / rho);
}

double alpha_M(double rho, double C, int M) {
  check_rho_C(rho, C);
  if (M < 0) throw DomainError("alpha_M needs M >= 0");
  return 1.0 - C * std::pow(rho, M);
}

double no_terminal_horizon_bound(double gamma) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) {
    throw DomainError("no-terminal horizon bound needs gamma > 1");
  }
  const double lg = std::log(gamma);
  return 2.0 * lg / (lg - std::log(gamma - 1.0));
}

ControllabilityCertificate ControllabilityCertificate::from_constants(double rho, double C,
                                                                      double eps, int k_max) {
  check_rho_C(rho, C);
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("eps must be positive");
  if (k_max < 0) throw DomainError("k_max must be non-negative");
  ControllabilityCertificate cert;
  cert.rho = rho;
  cert.C = C;
  cert.eps = eps;
  cert.gamma_inf = gamma_k(rho, C, kInfiniteHorizon);
  cert.gamma_table.reserve(k_max + 1);
  for (int k = 0; k <= k_max; ++k) cert.gamma_table.push_back(gamma_k(rho, C, k));
  return cert;
}

HorizonCertificate horizon_certificate(const ControllabilityCertificate& cert, int M, int N,
                                       double V_bar, const HorizonOverrides& overrides) {
  check_rho_C(cert.rho, cert.C);
  if (M < 1) throw DomainError("horizon certificate needs M >= 1");
  if (N < 1) throw DomainError("horizon certificate needs N >= 1");
  if (!(V_bar > 0.0) || !std::isfinite(V_bar)) throw DomainError("V_bar must be positive");
  if (!(cert.eps > 0.0)) throw DomainError("certificate eps must be positive");

  HorizonCertificate h;
  h.N = N;
  h.M = M;
  h.V_bar = V_bar;
  h.eps = cert.eps;

  h.gamma = overrides.gamma.value_or(gamma_k(cert.rho, cert.C, kInfiniteHorizon));
  h.gamma_overridden = overrides.gamma.has_value();
  if (!(h.gamma >= 1.0) || !std::isfinite(h.gamma)) throw DomainError("gamma must be >= 1");
  h.c_M = overrides.c_M.value_or(c_M_analytic(cert.rho, cert.C, M));
  h.c_M_overridden = overrides.c_M.has_value();
  if (!(h.c_M >= 0.0) || !std::isfinite(h.c_M)) throw DomainError("c_M must be non-negative");

  const double level_ratio = V_bar / cert.eps;
  h.gamma_Vbar = std::max(h.gamma, level_ratio);
  h.gamma_lower = std::min(h.gamma, level_ratio);
  h.rho_gamma = (h.gamma - 1.0) / h.gamma;
  h.log_rate = h.gamma > 1.0 ? std::log(h.gamma) - std::log(h.gamma - 1.0) : kInf;

  h.N0_real = std::max(0.0, (V_bar - h.gamma * cert.eps) / cert.eps);
  h.N0 = static_cast<int>(std::ceil(h.N0_real));

  // With analytic constants c_M * gamma = C^2 rho^M / (1 - rho^M).
  const double growth = h.c_M * h.gamma;
  const double log_lower = std::log(h.gamma_lower);
  const double log_growth = growth > 0.0 ? std::log(growth) : -kInf;
  auto scaled = [&](double v) { return std::isinf(h.log_rate) ? (v > 0.0 ? 0.0 : (v < 0.0 ? -kInf : 0.0)) : v / h.log_rate; };

  h.N1_real = h.N0 + scaled(std::max(log_lower, 0.0));
  h.N1 = h.N0 + static_cast<int>(std::ceil(scaled(std::max(log_lower, 0.0))));
  h.N2 = h.N0 + scaled(log_growth);
  h.N_M = h.N0 + scaled(std::max({log_lower, log_growth, 0.0}));
  h.N_min = static_cast<int>(std::floor(h.N_M)) + 1;

  h.M_lower = m_lower_threshold(cert.rho, cert.C);
  h.alpha_M = alpha_M(cert.rho, cert.C, M);

  const double decay = std::pow(h.rho_gamma, N - h.N0);
  h.eps_NM = 1.0 - growth * decay;
  h.alpha_NM = h.eps_NM / (1.0 + h.gamma * decay);
  h.certified = (N > h.N_M) && (h.eps_NM > 0.0);
  return h;
}

// ---------------------------------------------------------------------------
// Sampling estimator

void SamplingPlan::validate() const {
  if (eps_grid.empty()) throw DomainError("sampling plan needs at least one candidate eps");
  for (double e : eps_grid) {
    if (!(e > 0.0) || !std::isfinite(e)) throw DomainError("candidate eps values must be positive");
  }
  if (boundary_samples < 0 || interior_samples < 0 || boundary_samples + interior_samples == 0) {
    throw DomainError("sampling plan needs a positive number of samples");
  }
  if (rollout_steps < 1) throw DomainError("rollout_steps must be at least 1");
  if (max_tail_horizon < 1 || max_tail_horizon >= rollout_steps) {
    throw DomainError("max_tail_horizon must lie in [1, rollout_steps)");
  }
  if (!(rho_grid_step > 0.0 && rho_grid_step < 1.0)) {
    throw DomainError("rho_grid_step must lie in (0, 1)");
  }
  if (!(rho_grid_max > 0.0 && rho_grid_max < 1.0)) {
    throw DomainError("rho_grid_max must lie in (0, 1)");
  }
  if (workers < 1) throw DomainError("workers must be at least 1");
}

double ControllabilityEstimate::gamma_at(int k) const {
  if (empirical_gamma.empty()) throw DomainError("empty empirical gamma table");
  k = std::clamp(k, 0, static_cast<int>(empirical_gamma.size()) - 1);
  return empirical_gamma[k];
}

std::optional<double> ControllabilityEstimate::c_M_at(int M) const {
  if (M < 1 || M >= static_cast<int>(empirical_c_M.size())) return std::nullopt;
  return empirical_c_M[M];
}

namespace {

struct SampleTrace {
  std::vector<double> l;     // l_kappa(phi_k), k = 0 .. K
  std::vector<double> lmin;  // l_min(phi_k)
  double violation = 0.0;    // largest excursion from Z (or U for the raw law)
  int violation_step = -1;
};

SampleTrace trace_sample(const DiscreteSystem& sys, const QuadraticStageCost& cost,
                         const TailController& kappa, const Vector& x0, int K,
                         bool require_unsaturated) {
  const ConstraintBox& box = sys.box();
  SampleTrace tr;
  tr.l.reserve(K + 1);
  tr.lmin.reserve(K + 1);
  Vector x = x0;
  for (int k = 0; k <= K; ++k) {
    if (!x.allFinite()) {
      tr.violation = kInf;
      tr.violation_step = k;
      break;
    }
    const Vector raw = kappa.unsaturated(x);
    const Vector u = box.clip_input(raw);
    double v = box.state_violation(x);
    if (require_unsaturated) {
      v = std::max({v, (raw - box.u_hi()).maxCoeff(), (box.u_lo() - raw).maxCoeff()});
    }
    if (v > tr.violation) {
      tr.violation = v;
      tr.violation_step = k;
    }
    tr.l.push_back(stage_cost(cost, x, u));
    tr.lmin.push_back(stage_cost_min(cost, box, x));
    if (k < K) x = sys.step(x, u);
  }
  return tr;
}

std::vector<Vector> draw_level_samples(const QuadraticStageCost& cost, const ConstraintBox& box,
                                       double eps, const SamplingPlan& plan, int level_index) {
  const int n = cost.state_dim();
  std::seed_seq seq{static_cast<std::uint32_t>(plan.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(plan.seed >> 32),
                    static_cast<std::uint32_t>(level_index)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // l_min(x) = |x - x_s|_Q^2 + offset, offset > 0 only if u_s is outside U.
  const double offset = stage_cost_min(cost, box, cost.x_s());
  const double radius = std::sqrt(std::max(eps - offset, 0.0));
  const Vector inv_sqrt_q = cost.q_diag().cwiseSqrt().cwiseInverse();

  std::vector<Vector> samples;
  samples.reserve(plan.boundary_samples + plan.interior_samples);
  const int total = plan.boundary_samples + plan.interior_samples;
  for (int i = 0; i < total; ++i) {
    Vector d(n);
    do {
      for (int j = 0; j < n; ++j) d(j) = normal(rng);
    } while (d.norm() == 0.0);
    d.normalize();
    double r = 1.0;
    if (i >= plan.boundary_samples) {
      // Uniform in the ellipsoid; resample the (measure-zero) centre.
      do {
        r = std::pow(uniform(rng), 1.0 / n);
      } while (r == 0.0);
    }
    samples.push_back(cost.x_s() + radius * r * inv_sqrt_q.cwiseProduct(d));
  }
  return samples;
}

// max_{k >= j} l_k rho^-(k-j), evaluated for every start j by a backward sweep.
void fit_envelope(const std::vector<double>& l, double rho, std::vector<double>& envelope) {
  const int K = static_cast<int>(l.size()) - 1;
  envelope.assign(K + 1, 0.0);
  envelope[K] = l[K];
  for (int j = K - 1; j >= 0; --j) {
    const double carried =
        rho > 0.0 ? envelope[j + 1] / rho : (envelope[j + 1] > 0.0 ? kInf : 0.0);
    envelope[j] = std::max(l[j], carried);
  }
}

}  // namespace

ControllabilityEstimate estimate_controllability(const DiscreteSystem& sys,
                                                 const QuadraticStageCost& cost,
                                                 const TailController& kappa,
                                                 const SamplingPlan& plan) {
  plan.validate();
  if (cost.state_dim() != sys.state_dim() || cost.input_dim() != sys.input_dim()) {
    throw DomainError("stage cost and system dimensions disagree");
  }
  const int K = plan.rollout_steps;

  std::vector<double> levels = plan.eps_grid;
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  std::vector<double> rho_grid;
  for (int i = 0;; ++i) {
    const double r = i * plan.rho_grid_step;
    if (r > plan.rho_grid_max + 1e-12) break;
    rho_grid.push_back(r);
  }

  ControllabilityEstimate est;
  for (int li = 0; li < static_cast<int>(levels.size()); ++li) {
    const double eps = levels[li];
    const std::vector<Vector> samples = draw_level_samples(cost, sys.box(), eps, plan, li);
    std::vector<SampleTrace> traces(samples.size());
    parallel_for(static_cast<int>(samples.size()), plan.workers, [&](int i) {
      traces[i] = trace_sample(sys, cost, kappa, samples[i], K, plan.require_unsaturated);
    });

    LevelDiagnostics diag;
    diag.eps = eps;
    int worst = -1;
    for (int i = 0; i < static_cast<int>(traces.size()); ++i) {
      if (traces[i].violation > 0.0) {
        ++diag.violating_samples;
        if (worst < 0 || traces[i].violation > traces[worst].violation) worst = i;
      }
    }
    if (worst >= 0) {
      diag.reason = plan.require_unsaturated
                        ? "rollout leaves Z or saturates the feedback"
                        : "rollout leaves Z";
      diag.worst_sample = samples[worst];
      diag.worst_step = traces[worst].violation_step;
      diag.worst_violation = traces[worst].violation;
      est.levels.push_back(std::move(diag));
      continue;
    }

    // Fit (rho, C) over the drawn samples and every later rollout state inside
    // the sublevel set. Boundary samples sit on l_min = eps up to rounding.
    const double eps_in = eps * (1.0 + 1e-9);
    double best_gamma = kInf, best_rho = 0.0, best_C = kInf;
    std::vector<double> envelope;
    for (double rho : rho_grid) {
      double C = 1.0;
      for (const SampleTrace& tr : traces) {
        fit_envelope(tr.l, rho, envelope);
        for (int j = 0; j <= K; ++j) {
          if (tr.lmin[j] > 0.0 && (j == 0 || tr.lmin[j] <= eps_in)) {
            C = std::max(C, envelope[j] / tr.lmin[j]);
          }
        }
        if (std::isinf(C)) break;
      }
      const double g = C / (1.0 - rho);
      if (g < best_gamma) {
        best_gamma = g;
        best_rho = rho;
        best_C = C;
      }
    }
    if (!std::isfinite(best_gamma)) {
      diag.reason = "no decay rate on the rho grid bounds the sampled costs";
      est.levels.push_back(std::move(diag));
      continue;
    }

    diag.accepted = true;
    est.levels.push_back(std::move(diag));
    est.certificate = ControllabilityCertificate::from_constants(best_rho, best_C, eps, K);
    est.sample_count = static_cast<int>(samples.size());

    // Empirical gamma_k over the drawn samples.
    est.empirical_gamma.assign(K + 1, 0.0);
    for (const SampleTrace& tr : traces) {
      if (!(tr.lmin[0] > 0.0)) continue;
      double acc = 0.0;
      for (int k = 1; k <= K; ++k) {
        acc += tr.l[k - 1];
        est.empirical_gamma[k] = std::max(est.empirical_gamma[k], acc / tr.lmin[0]);
      }
    }

    // Empirical c_M over every rollout state with V_{f,M} <= eps.
    const int M_max = plan.max_tail_horizon;
    est.empirical_c_M.assign(M_max + 1, std::nullopt);
    est.c_M_support.assign(M_max + 1, 0);
    for (const SampleTrace& tr : traces) {
      std::vector<double> prefix(K + 2, 0.0);
      for (int k = 0; k <= K; ++k) prefix[k + 1] = prefix[k] + tr.l[k];
      for (int M = 1; M <= M_max; ++M) {
        for (int j = 0; j + M <= K; ++j) {
          const double V = prefix[j + M] - prefix[j];
          if (!(V > 0.0) || V > eps_in) continue;
          const double ratio = tr.l[j + M] / V;
          auto& slot = est.empirical_c_M[M];
          slot = slot ? std::max(*slot, ratio) : ratio;
          ++est.c_M_support[M];
        }
      }
    }
    return est;
  }

  std::string msg = "no candidate eps validated;";
  for (const auto& d : est.levels) {
    msg += " eps=" + std::to_string(d.eps) + ": " + d.reason + " (" +
           std::to_string(d.violating_samples) + " samples, worst excursion " +
           std::to_string(d.worst_violation) + " at step " + std::to_string(d.worst_step) + ");";
  }
  throw CertificationError(msg);
}

// ---------------------------------------------------------------------------

LinearizedAnalysis linearized_mpc_analysis(const Matrix& A, const Matrix& B,
                                           const QuadraticStageCost& cost, const Matrix& K_tail,
                                           int N, int M) {
  if (N < 1 || M < 1) throw DomainError("linearized analysis needs N, M >= 1");
  const Matrix Q = cost.Q();
  const Matrix R = cost.R();
  const Matrix A_k = A - B * K_tail;
  const Matrix Q_k = Q + K_tail.transpose() * R * K_tail;

  // Tail weight: sum_{k<M} A_k'^k Q_k A_k^k.
  Matrix P = Matrix::Zero(A.rows(), A.rows());
  Matrix T = Matrix::Identity(A.rows(), A.rows());
  for (int k = 0; k < M; ++k) {
    P += T.transpose() * Q_k * T;
    T = A_k * T;
  }
  Matrix gain;
  for (int i = 0; i < N; ++i) {
    const Matrix S = R + B.transpose() * P * B;
    gain = S.ldlt().solve(B.transpose() * P * A);
    const Matrix Acl = A - B * gain;
    P = Q + gain.transpose() * R * gain + Acl.transpose() * P * Acl;
    P = 0.5 * (P + P.transpose());
  }

  LinearizedAnalysis out;
  out.P = P;
  out.K_mpc = gain;
  const Matrix Acl = A - B * gain;
  out.spectral_radius = spectral_radius(Acl);
  out.stable = out.spectral_radius < 1.0;

  const Matrix W = Q + gain.transpose() * R * gain;  // l(x, -K x)
  const Matrix D = P - Acl.transpose() * P * Acl;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> descent(0.5 * (D + D.transpose()), W);
  out.eps = descent.eigenvalues().minCoeff();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> sandwich(P, Q);
  out.gamma = sandwich.eigenvalues().maxCoeff();
  return out;
}

}  // namespace ftmpc
