#pragma once

#include <stdexcept>
#include <string>

namespace brmax {

// Base for all library errors. `exit_code()` maps onto the CLI contract:
// 2 for input/validation problems, 3 for numerical failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  [[nodiscard]] virtual int exit_code() const { return 2; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const override { return 3; }
};

class AnchorCoincident : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NotPositiveDefinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DimensionTooLarge : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyBlock : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PartitionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class GroundMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ShapeTooLarge : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptyDays : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigInvalid : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : ValidationError(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace brmax
