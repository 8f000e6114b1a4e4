#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace prb {

/// Base class for every error the library raises. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value is outside the domain an operation accepts (label out of range,
/// negative radius, rho outside (0, 1], ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the gradient tape (non-scalar root, unknown node id).
class TapeError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration failed validation. `issues` holds one entry per
/// offending field, each prefixed with the dotted field path.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Dataset or checkpoint bytes could not be ingested.
class DataError : public Error {
 public:
  enum class Kind { missing_file, bad_magic, truncated, dim_mismatch, bad_format };
  DataError(Kind kind, const std::string& what);
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A NaN or Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace prb
