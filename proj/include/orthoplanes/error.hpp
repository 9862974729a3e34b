#pragma once

#include <stdexcept>
#include <string>

namespace orthoplanes {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Malformed,
  EmptyCloud,
  TooFewPoints,
  NearParallel,
  Singular,
  ConflictingStructure,
  InsufficientSupport,
  EmptyAssignment,
  Collinear,
  TooFewCorners,
  NoOverlap,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure of a library operation surfaces as this exception; the C
// layer maps `code()` one-to-one onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace orthoplanes
