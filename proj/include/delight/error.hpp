#pragma once

#include <stdexcept>
#include <string>

namespace delight {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, unreadable, malformed, or of an unsupported encoding.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration key, value or range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition of an operation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace delight
