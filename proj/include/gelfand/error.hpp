#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace gelfand {

/// Base of every failure raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDomain : public Error {
 public:
  using Error::Error;
};

class InvalidSingularity : public Error {
 public:
  using Error::Error;
};

class MeshFailure : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class InvalidWeight : public Error {
 public:
  using Error::Error;
};

class OverflowGuard : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// Newton iterate left the admissible range; the last iterate is kept for
/// inspection.
class BlowupDetected : public Error {
 public:
  BlowupDetected(const std::string& what, Eigen::VectorXd last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}

  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }

 private:
  Eigen::VectorXd last_iterate_;
};

class DegenerateWeight : public Error {
 public:
  using Error::Error;
};

class FoldSingularity : public Error {
 public:
  using Error::Error;
};

class NoFoldInRange : public Error {
 public:
  using Error::Error;
};

class InvalidDensity : public Error {
 public:
  using Error::Error;
};

class UnsupportedRegime : public Error {
 public:
  using Error::Error;
};

class InvalidDelta : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gelfand
