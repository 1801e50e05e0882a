#pragma once
#include <stdexcept>
#include <string>

namespace liflab {

// Bad user input: rejected parameters, malformed files, mismatched grids.
// The command-line driver maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A computation failed to reach its stated accuracy or hit an internal
// guard (non-convergence, negative density, unstable step size).
// The command-line driver maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace liflab
