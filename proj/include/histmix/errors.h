#pragma once

#include <stdexcept>
#include <string>

namespace histmix {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or axis mismatch. The message names the offending axes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Near-zero norm, empty mask or vanishing denominator.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. calling backward on a non-scalar node.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced during evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Malformed or version-mismatched file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace histmix
