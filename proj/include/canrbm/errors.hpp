// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace canrbm {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, configuration value, or violated precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix/model size disagreement.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// File or stream failure, including truncated or version-mismatched inputs.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input record (strict parse mode only; lenient mode reports instead).
class ParseError : public Error {
 public:
  ParseError(const std::string& reason, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace canrbm
