#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ftmpc/commands.hpp"

namespace ftmpc {

/// Shortest round-trip decimal form; "inf"/"nan" for non-finite values.
std::string format_number(double v);

/// Structured-text report of a certification run. Sections are named after
/// the source of their constants (estimate, analytic, empirical, published).
void write_certify_report(std::ostream& os, const RunConfig& cfg, const CertificationRun& run);

/// k, gamma_k[analytic], gamma_k[empirical], gamma_k[published].
void write_gamma_csv(std::ostream& os, const CertificationRun& run);

/// M, c_M[analytic], c_M[lp], c_M[empirical], support[empirical].
void write_c_M_csv(std::ostream& os, const CertificationRun& run);

struct CompareRow {
  int M = 0;
  double c_M_analytic = 0.0;
  double N_M_analytic = 0.0;
  std::optional<double> c_M_empirical;
  std::optional<double> N_M_empirical;
  std::optional<double> c_M_published;
  std::optional<double> N_M_published;
  double tail_factor = 0.0;  // rho^M / (1 - rho^M) with the fitted rho
};

struct CompareTable {
  double M_lower = 0.0;
  double no_terminal_analytic = 0.0;
  std::optional<double> no_terminal_empirical;
  std::optional<double> no_terminal_published;
  std::optional<double> M_lower_published;
  std::vector<CompareRow> rows;
};

void write_compare_csv(std::ostream& os, const CompareTable& table);
void write_compare_summary(std::ostream& os, const CompareTable& table);

void write_guarantee_report(std::ostream& os, const ClosedLoopTrace& trace,
                            const GuaranteeReport& report);

struct SweepResult {
  int N = 0, M = 0;
  int x0_index = 0;
  Vector x0;
  bool feasible = false;
  bool all_optimal = false;
  bool converged = false;
  bool monotone = false;
  int steps = 0;
  double V0 = 0.0;
  double closed_loop_cost = 0.0;
  double final_l_min = 0.0;
  int failure_step = -1;
};

void write_sweep_csv(std::ostream& os, const std::vector<SweepResult>& results);

}  // namespace ftmpc

namespace ftmpc {

/// N_M over the configured M sweep (defaults to a fixed grid up to k_max/2)
/// for each constant path. The empirical column uses sup_k gamma_k.
CompareTable build_compare_table(const RunConfig& cfg, const CertificationRun& run);

}  // namespace ftmpc
