#pragma once

#include <stdexcept>
#include <string>

namespace hyperfit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document, inconsistent configuration, or violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside the admissible domain (e.g. det F <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// det F <= 0 at a quadrature point of a specific element.
class InvertedDeformation : public DomainError {
 public:
  InvertedDeformation(int element, const std::string& what)
      : DomainError(what), element_(element) {}
  int element() const noexcept { return element_; }

 private:
  int element_;
};

/// Non-finite loss or stress during training or evaluation.
class NumericalError : public Error {
 public:
  NumericalError(int step_id, int element, const std::string& what)
      : Error(what), step_id_(step_id), element_(element) {}
  int step_id() const noexcept { return step_id_; }
  int element() const noexcept { return element_; }

 private:
  int step_id_;
  int element_;
};

/// Forward Newton solve failed to converge within the bisection budget.
class SolverError : public Error {
 public:
  SolverError(double last_converged_stretch, const std::string& what)
      : Error(what), last_converged_(last_converged_stretch) {}
  double last_converged_stretch() const noexcept { return last_converged_; }

 private:
  double last_converged_;
};

}  // namespace hyperfit
