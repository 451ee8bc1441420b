#pragma once

#include <stdexcept>
#include <string>

namespace drmoe {

// Bad input: shapes, config fields, file contents. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while computing (non-finite values, I/O).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drmoe
