#pragma once

#include <stdexcept>
#include <string>

namespace frbm {

// Base of every error raised by the library. The CLI maps the subclasses to
// exit codes (config 2, numerical 3, I/O 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-convergence, indefiniteness, degenerate interpolation families.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace frbm
