#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wdrkf {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NotPsdError : public Error {
 public:
  NotPsdError(const std::string& what, double min_eigenvalue)
      : Error(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// Singular factorizations, failed brackets, eigensolver breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A fixed-point iteration ran out of iterations.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int iterations, double last_residual)
      : Error(what), iterations_(iterations), last_residual_(last_residual) {}
  int iterations() const noexcept { return iterations_; }
  double last_residual() const noexcept { return last_residual_; }

 private:
  int iterations_;
  double last_residual_;
};

/// Controllability of (A, Sigma_w^{1/2}) or observability of (A, C) failed.
class AssumptionError : public Error {
 public:
  AssumptionError(const std::string& what, bool controllable, bool observable)
      : Error(what), controllable_(controllable), observable_(observable) {}
  bool controllable() const noexcept { return controllable_; }
  bool observable() const noexcept { return observable_; }

 private:
  bool controllable_;
  bool observable_;
};

class CertificationError : public Error {
 public:
  using Error::Error;
};

/// Perturbation block outside 0 <= Phi < phi_tilde * I.
class InfeasiblePhiError : public Error {
 public:
  using Error::Error;
};

/// The risk-sensitive information matrix lost positive definiteness.
class RiskParameterError : public Error {
 public:
  RiskParameterError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A per-step optimization inside a filter run failed; carries the step index.
class FilterStepError : public Error {
 public:
  FilterStepError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace wdrkf
