#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "ftmpc/config.hpp"
#include "ftmpc/simulate.hpp"

namespace ftmpc {

/// Process exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitViolated = 1,
  kExitUsage = 2,
  kExitSolverFailure = 3,
};

/// Certificates for one (N, M) along the three constant paths.
struct CertificationRun {
  ControllabilityEstimate estimate;
  double V_bar = 0.0;
  HorizonCertificate analytic;   // fitted (rho, C), analytic gamma and c_M
  HorizonCertificate empirical;  // fitted (rho, C), measured gamma_{N+M} and c_M
  std::optional<ControllabilityCertificate> published_constants;
  std::optional<HorizonCertificate> published;

  bool certified() const;
};

CertificationRun run_certification(const RunConfig& cfg, const Setup& setup, int N, int M);

/// Certificate from externally quoted constants: gamma is the capped
/// gamma_{N+M} of (rho, C), c_M the quoted value when present.
HorizonCertificate published_certificate(const PublishedConstants& pc, int N, int M,
                                         double V_bar);

/// Bounds for the closed-loop checks as selected by [simulate].
GuaranteeBounds simulation_bounds(const RunConfig& cfg, const Setup& setup);

int cmd_certify(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_compare(const RunConfig& cfg, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log);

/// Dispatches by name and maps exceptions to exit codes: configuration
/// problems to kExitUsage, numerical failures to kExitSolverFailure.
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log);

}  // namespace ftmpc
