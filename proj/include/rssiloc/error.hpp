#pragma once

#include <stdexcept>
#include <string>

namespace rssiloc {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, schema violation or broken invariant in user input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or unwritable file, malformed file contents.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Argument outside a function's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace rssiloc
