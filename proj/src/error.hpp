#pragma once

#include <stdexcept>
#include <string>

namespace ttlab {

// Base for all errors raised by the library. Subclasses map 1:1 onto the
// C API status codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// File system / stream failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (corpus records, vocab files, checkpoints, CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Operation not valid against the current state (vocab mismatch, empty model).
class StateError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ttlab
