#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace blowup {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDomain : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold for the given input.
class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or an otherwise undefined numeric quantity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A standing hypothesis of the problem class is violated (empty plus region,
/// r <= 1, boundary-component condition, ...). `hypothesis()` names it.
class HypothesisViolation : public Error {
 public:
  HypothesisViolation(std::string hypothesis, const std::string& detail)
      : Error("hypothesis violated [" + hypothesis + "]: " + detail),
        hypothesis_(std::move(hypothesis)) {}

  const std::string& hypothesis() const noexcept { return hypothesis_; }

 private:
  std::string hypothesis_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Iterative method stopped without meeting its tolerance. Carries the last
/// iterate so callers can inspect or persist it.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double residual, int iterations,
                     std::vector<double> last_iterate = {})
      : Error(what + " (residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations),
        last_iterate_(std::move(last_iterate)) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }
  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

 private:
  double residual_;
  int iterations_;
  std::vector<double> last_iterate_;
};

/// Factorization of a (nearly) singular matrix, typically a Jacobian close to
/// a fold or bifurcation point.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

}  // namespace blowup
