#pragma once

#include <stdexcept>
#include <string>

namespace hjlab {

// Base for everything the library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration, out-of-range query, violated precondition.
struct ValidationError : Error {
  using Error::Error;
};

// Non-finite arithmetic or an unusable numerical result.
struct NumericError : Error {
  using Error::Error;
};

// Backtrace requested from a node the front never reached.
struct UnreachableError : ValidationError {
  using ValidationError::ValidationError;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace hjlab
