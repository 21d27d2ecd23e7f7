#pragma once

#include <stdexcept>
#include <string>

namespace isect {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration, malformed inputs, violated preconditions. The CLI maps
// this to exit code 1.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Completion backend failures (transport errors, bad HTTP status, malformed
// responses, retry exhaustion). The CLI maps this to exit code 2.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(what) {}
};

}  // namespace isect
