#pragma once

#include <stdexcept>
#include <string>

namespace claid {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Bad magic, wrong dtype, malformed JSON.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Payload shorter or longer than the header implies.
class LengthError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (empty subset, zero-area box).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void expects(bool condition, const char* what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace claid
