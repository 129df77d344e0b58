#pragma once

#include <stdexcept>
#include <string>

namespace emi {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Softmax or pooling was asked to normalize over zero valid positions.
class DegenerateMaskError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Bad configuration value or unparsable config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data failed validation.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file (feature tensor or checkpoint).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values appeared during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace emi
