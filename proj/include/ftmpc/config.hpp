#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ftmpc/certify.hpp"
#include "ftmpc/mpc.hpp"

namespace ftmpc {

struct PlantConfig {
  std::string model = "four_tank";  // "four_tank" or "linear"
  FourTankParams four_tank;
  Matrix A, B;  // linear model: x+ = x_s + A (x - x_s) + B (u - u_s)
  Vector x_s, u_s;
  Vector x_lo, x_hi, u_lo, u_hi;
};

/// Constants quoted from an external study, used as a third certification path.
struct PublishedConstants {
  double rho = 0.0;
  double C = 1.0;
  double eps = 0.0;
  std::optional<double> gamma_cap;  // caps the analytic gamma_k table
  std::optional<double> c_M;
};

struct CertifyConfig {
  SamplingPlan plan;
  double v_bar_factor = 1.05;      // V_bar = v_bar_factor * eps
  std::optional<double> v_bar;     // absolute V_bar, overrides the factor
  std::vector<int> compare_M;      // M sweep of the compare table
  std::optional<PublishedConstants> published;
};

struct SimulateConfig {
  std::optional<Vector> x0;         // absolute initial state
  std::optional<Vector> x0_offset;  // x0 = x_s + offset
  int T = 400;
  std::string bounds = "empirical";  // empirical | analytic | published | linearized
  std::optional<double> descent_rate;  // replaces eps_NM in the checks
  std::optional<double> gamma_bound;   // replaces gamma_Vbar in the checks
};

struct SweepConfig {
  std::vector<std::pair<int, int>> cells;  // (N, M)
  std::vector<Vector> x0_offsets;
  int workers = 1;
};

struct RunConfig {
  PlantConfig plant;
  Vector q, r;
  std::optional<Matrix> tail_gain;
  MpcConfig mpc;
  CertifyConfig certify;
  SimulateConfig simulate;
  SweepConfig sweep;
  std::filesystem::path output_dir = "out";
};

/// Parses and validates a TOML run configuration. Unknown keys, missing
/// required entries and violated invariants raise ConfigError.
RunConfig parse_config(const std::string& toml_text, const std::string& source = "<string>");
RunConfig load_config(const std::filesystem::path& path);

/// Plant, stage cost and tail controller described by a configuration.
struct Setup {
  DiscreteSystem sys;
  QuadraticStageCost cost;
  TailController kappa;

  MpcProblem problem(const MpcConfig& mpc) const { return MpcProblem{sys, cost, kappa, mpc}; }
};

Setup build_setup(const RunConfig& cfg);

/// Initial state of the [simulate] block.
Vector initial_state(const RunConfig& cfg, const Setup& setup);

}  // namespace ftmpc
