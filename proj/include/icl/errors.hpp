#pragma once

#include <stdexcept>
#include <string>

namespace icl {

/// Caller supplied something outside an operation's domain.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A linear system or iteration failed numerically.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough observations to fit the requested model.
class InsufficientData : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition on weights or inputs was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An experiment configuration failed validation at a specific key path.
class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string field, const std::string& message)
      : InvalidInput(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace icl
