#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ftmpc/cost.hpp"
#include "ftmpc/model.hpp"
#include "ftmpc/tail.hpp"

namespace ftmpc {

/// Tag selecting the k -> infinity limit of gamma_k.
struct InfiniteHorizon {};
inline constexpr InfiniteHorizon kInfiniteHorizon{};

/// Accumulated cost bound gamma_k = C (1 - rho^k) / (1 - rho).
/// Throws DomainError unless rho in [0, 1), C >= 1, k >= 0.
double gamma_k(double rho, double C, int k);
/// gamma_inf = C / (1 - rho).
double gamma_k(double rho, double C, InfiniteHorizon);

/// Tail growth constant c_M = C rho^M (1 - rho) / (1 - rho^M).
double c_M_analytic(double rho, double C, int M);

/// Same constant obtained by numerically solving
///   max l_M  s.t.  sum_{k<M} l_k = 1,  l_M <= C rho^(M-k) l_k,  l >= 0.
/// Throws std::logic_error if the LP solver does not report an optimum.
double c_M_lp(double rho, double C, int M);

/// M_lower = log(C) / log(1/rho); 0 for rho = 0.
double m_lower_threshold(double rho, double C);

/// alpha_M = 1 - C rho^M, the relaxed-CLF decrease factor of V_{f,M}.
double alpha_M(double rho, double C, int M);

/// Horizon needed by the plain no-terminal-cost argument,
/// 2 log(gamma) / (log(gamma) - log(gamma - 1)). Requires gamma > 1.
double no_terminal_horizon_bound(double gamma);

/// Exponential cost controllability constants (rho, C, eps) of the tail
/// feedback together with the analytic gamma_k table.
struct ControllabilityCertificate {
  double rho = 0.0;
  double C = 1.0;
  double eps = 0.0;
  std::vector<double> gamma_table;  // gamma_k for k = 0 .. k_max
  double gamma_inf = 1.0;

  /// Validates rho in [0, 1), C >= 1, eps > 0 and fills the table.
  static ControllabilityCertificate from_constants(double rho, double C, double eps, int k_max);
};

/// Replacements for the analytic constants used inside horizon_certificate.
struct HorizonOverrides {
  std::optional<double> gamma;  // e.g. the largest measured gamma_k
  std::optional<double> c_M;    // e.g. the measured tail growth constant
};

/// Every constant of the closed-loop horizon analysis for one (N, M, V_bar).
struct HorizonCertificate {
  int N = 0;
  int M = 0;
  double V_bar = 0.0;
  double eps = 0.0;

  double gamma = 0.0;        // gamma actually used
  double gamma_Vbar = 0.0;   // max{gamma, V_bar / eps}
  double gamma_lower = 0.0;  // min{gamma, V_bar / eps}
  double rho_gamma = 0.0;    // (gamma - 1) / gamma
  double log_rate = 0.0;     // log(gamma) - log(gamma - 1), +inf for gamma = 1
  double c_M = 0.0;          // tail growth constant used

  double N0_real = 0.0;  // max{0, (V_bar - gamma eps) / eps}
  int N0 = 0;
  double N1_real = 0.0;
  int N1 = 0;
  double N2 = 0.0;       // eps_NM > 0 for N > N2
  double N_M = 0.0;      // all bounds hold for N > N_M
  int N_min = 0;         // smallest integer N with N > N_M

  double M_lower = 0.0;
  double alpha_M = 0.0;  // 1 - C rho^M

  double eps_NM = 0.0;
  double alpha_NM = 0.0;
  bool certified = false;

  bool gamma_overridden = false;
  bool c_M_overridden = false;
};

/// Requires M >= 1, N >= 1, V_bar > 0. gamma defaults to gamma_inf.
HorizonCertificate horizon_certificate(const ControllabilityCertificate& cert, int M, int N,
                                       double V_bar, const HorizonOverrides& overrides = {});

/// Sampling configuration for the empirical estimation of (rho, C, eps).
struct SamplingPlan {
  std::vector<double> eps_grid;  // candidate sublevels, tried largest first
  int boundary_samples = 200;
  int interior_samples = 200;
  int rollout_steps = 200;      // k_max
  int max_tail_horizon = 60;    // empirical c_M for M = 1 .. max_tail_horizon
  double rho_grid_step = 0.005;
  double rho_grid_max = 0.995;
  std::uint64_t seed = 1;
  int workers = 1;
  /// Also require the unclipped feedback to stay inside U, so the validated
  /// sublevel set is one where saturation never engages.
  bool require_unsaturated = true;

  void validate() const;
};

struct LevelDiagnostics {
  double eps = 0.0;
  bool accepted = false;
  std::string reason;            // empty when accepted
  int violating_samples = 0;
  std::optional<Vector> worst_sample;
  int worst_step = -1;
  double worst_violation = 0.0;
};

struct ControllabilityEstimate {
  ControllabilityCertificate certificate;
  /// max over samples of V_{f,k}(x) / l_min(x), k = 0 .. k_max.
  std::vector<double> empirical_gamma;
  /// max over sampled states with V_{f,M} <= eps of l_kappa(phi_M) / V_{f,M};
  /// index M, entry 0 unused. Empty optional when no state qualified.
  std::vector<std::optional<double>> empirical_c_M;
  std::vector<int> c_M_support;
  int sample_count = 0;
  std::vector<LevelDiagnostics> levels;

  double gamma_at(int k) const;
  std::optional<double> c_M_at(int M) const;
};

/// Samples the eps-sublevel set of l_min (boundary and interior), rolls out
/// kappa, and accepts the largest eps for which every rollout stays in Z. The
/// fit picks the (rho, C) on the rho-grid with minimal C / (1 - rho) such that
/// l_kappa(phi_k(x)) <= C rho^k l_min(x) for every sampled start, where the
/// starts include all rollout states that themselves lie in the sublevel set.
/// Deterministic for a fixed seed regardless of `workers`.
/// Throws CertificationError if no candidate level validates.
ControllabilityEstimate estimate_controllability(const DiscreteSystem& sys,
                                                 const QuadraticStageCost& cost,
                                                 const TailController& kappa,
                                                 const SamplingPlan& plan);

/// Local analysis of the unconstrained finite-tail MPC on the linearization:
/// the MPC is then the linear feedback u = -K_mpc x with quadratic value
/// x' P x. `eps` is the largest constant with V(x+) - V(x) <= -eps l(x, u)
/// and `gamma` the smallest with V(x) <= gamma l_min(x).
struct LinearizedAnalysis {
  Matrix P;
  Matrix K_mpc;
  double eps = 0.0;
  double gamma = 0.0;
  double spectral_radius = 0.0;
  bool stable = false;
};

LinearizedAnalysis linearized_mpc_analysis(const Matrix& A, const Matrix& B,
                                           const QuadraticStageCost& cost, const Matrix& K_tail,
                                           int N, int M);

}  // namespace ftmpc
