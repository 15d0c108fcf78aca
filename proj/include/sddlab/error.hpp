#pragma once

#include <stdexcept>
#include <string>

namespace sddlab {

// Bad input: malformed config, violated precondition, unknown key.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while executing a well-formed request (I/O, transport, numerics).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sddlab
