#pragma once

#include <stdexcept>
#include <string>

namespace cirloc {

/// Bad argument or configuration supplied by the caller.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent experiment specification (method/config mismatch).
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for everything caused by the data rather than by the caller.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed record in a dataset file; carries the 1-based row number.
class ParseError : public DataError {
 public:
  ParseError(std::size_t row, const std::string& what)
      : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Operation applied to a snapshot in the wrong processing state.
class StateError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace cirloc
