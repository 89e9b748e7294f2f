#pragma once

#include <stdexcept>
#include <string>

namespace freqpatch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an input violates an operation's precondition (wrong
// colorspace tag, out-of-range argument, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// An internal numerical invariant no longer holds.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace freqpatch
