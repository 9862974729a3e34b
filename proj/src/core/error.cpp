#include "orthoplanes/error.hpp"

namespace orthoplanes {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NearParallel: return "NearParallel";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::ConflictingStructure: return "ConflictingStructure";
    case ErrorCode::InsufficientSupport: return "InsufficientSupport";
    case ErrorCode::EmptyAssignment: return "EmptyAssignment";
    case ErrorCode::Collinear: return "Collinear";
    case ErrorCode::TooFewCorners: return "TooFewCorners";
    case ErrorCode::NoOverlap: return "NoOverlap";
  }
  return "Unknown";
}

}  // namespace orthoplanes
