#pragma once

#include <string>

#include "ftmpc/config.hpp"
#include "ftmpc/mpc.hpp"

namespace fixtures {

inline std::string config_path(const std::string& name) {
  return std::string(FTMPC_SOURCE_DIR) + "/configs/" + name;
}

inline const ftmpc::RunConfig& four_tank_config() {
  static const ftmpc::RunConfig cfg = ftmpc::load_config(config_path("four_tank.toml"));
  return cfg;
}

inline const ftmpc::Setup& four_tank() {
  static const ftmpc::Setup setup = ftmpc::build_setup(four_tank_config());
  return setup;
}

/// Reference initial condition x_s - (4, 4, 4, -2.5).
inline ftmpc::Vector four_tank_x0() {
  ftmpc::Vector d(4);
  d << 4.0, 4.0, 4.0, -2.5;
  return four_tank().sys.x_eq() - d;
}

/// Linear system x+ = A x + B u around the origin with a symmetric box.
inline ftmpc::DiscreteSystem linear_system(const ftmpc::Matrix& A, const ftmpc::Matrix& B,
                                           double x_bound, double u_bound) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  ftmpc::ConstraintBox box(ftmpc::Vector::Constant(n, -x_bound), ftmpc::Vector::Constant(n, x_bound),
                           ftmpc::Vector::Constant(m, -u_bound), ftmpc::Vector::Constant(m, u_bound));
  return ftmpc::DiscreteSystem(
      [A, B](const ftmpc::Vector& x, const ftmpc::Vector& u) -> ftmpc::Vector { return A * x + B * u; },
      box, ftmpc::Vector::Zero(n), ftmpc::Vector::Zero(m),
      [A, B](const ftmpc::Vector&, const ftmpc::Vector&) { return ftmpc::Jacobians{A, B}; });
}

}  // namespace fixtures
