#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lsdm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for a tensor primitive.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Row-level failure while reading delimited input.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid configuration or precondition on user-supplied data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace lsdm
