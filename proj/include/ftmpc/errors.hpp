#pragma once

#include <stdexcept>
#include <string>

namespace ftmpc {

/// Invalid or non-finite argument to a model or formula.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Finite-difference Jacobian evaluation hit a non-finite value.
class LinearizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Riccati iteration failed to converge.
class SynthesisError : public std::runtime_error {
 public:
  SynthesisError(const std::string& what, double best_spectral_radius)
      : std::runtime_error(what), best_spectral_radius_(best_spectral_radius) {}

  /// Closed-loop spectral radius of the best iterate seen.
  double best_spectral_radius() const { return best_spectral_radius_; }

 private:
  double best_spectral_radius_;
};

/// A closed-loop rollout produced a non-finite state.
class RolloutError : public std::runtime_error {
 public:
  RolloutError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}

  int step() const { return step_; }

 private:
  int step_;
};

/// No candidate sublevel set could be validated by sampling.
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ftmpc
