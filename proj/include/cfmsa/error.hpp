#pragma once

#include <stdexcept>
#include <string>

namespace cfmsa {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, out-of-range labels and similar caller mistakes.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Bad configuration values. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed feature or checkpoint files.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfmsa
