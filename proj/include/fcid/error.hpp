#pragma once

#include <stdexcept>
#include <string>

namespace fcid {

/// Bad arguments or violated invariants. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(const std::string& module, const std::string& what)
      : std::invalid_argument(module + ": " + what) {}
};

/// Failures that are not the caller's fault: I/O, corrupted files, divergence.
class RuntimeError : public std::runtime_error {
 public:
  RuntimeError(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what) {}
};

}  // namespace fcid
