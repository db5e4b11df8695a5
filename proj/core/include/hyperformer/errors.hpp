#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hyperformer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not satisfy an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated (empty input, bad ratio, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. `line()` is 1-based, or 0 when not tied to a line.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hyperformer
