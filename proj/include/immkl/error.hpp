#pragma once

#include <stdexcept>
#include <string>

namespace immkl {

enum class ErrorKind {
  SingularMatrix,
  Domain,
  InvalidParameter,
  DimensionMismatch,
  MeanUndefined,
  InvalidResult,
  DegenerateMode,
  Underflow,
  InnovationCovariance,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

// Every failure in the library surfaces as this exception; the kind selects
// the C API status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace immkl
