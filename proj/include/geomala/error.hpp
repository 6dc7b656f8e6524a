#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace geomala {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied arguments that violate a precondition (dimension
/// mismatch, empty trace, invalid starting point, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// The requested quantity is not provided by the object (e.g. a Hessian
/// from a target that does not expose one).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed at a specific point.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, Eigen::VectorXd at)
      : Error(what), point_(std::move(at)) {}
  const Eigen::VectorXd& point() const { return point_; }

 private:
  Eigen::VectorXd point_;
};

/// An SDE integration step produced a non-finite state.
class IntegrationError : public NumericError {
 public:
  IntegrationError(const std::string& what, Eigen::VectorXd at, double dt,
                   long step = -1)
      : NumericError(what, std::move(at)), dt_(dt), step_(step) {}
  double dt() const { return dt_; }
  long step() const { return step_; }

 private:
  double dt_;
  long step_;
};

/// Configuration file problems; carries the offending line when known.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace geomala
