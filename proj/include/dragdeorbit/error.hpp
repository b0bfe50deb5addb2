#pragma once

#include <stdexcept>
#include <string>

namespace dragdeorbit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV, config). Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A value lies outside its documented range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A query needs data the index series does not cover.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Geometry that leaves a frame undefined (r parallel to v, zero radius).
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// Numerical integration failed (step underflow, event not bracketed).
class PropagationError : public Error {
 public:
  using Error::Error;
};

/// No feasible guidance candidate exists for the requested target.
class ControlAuthorityError : public Error {
 public:
  using Error::Error;
};

/// Geodetic conversion did not converge within its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be inverted is singular (e.g. a degenerate noise covariance).
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

}  // namespace dragdeorbit
