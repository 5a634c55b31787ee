#include "adjfree/errors.hpp"

namespace adjfree {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::AdjointUnavailable: return "AdjointUnavailable";
    case ErrorCode::NotIsotropic: return "NotIsotropic";
    case ErrorCode::StepsizeUnresolvable: return "StepsizeUnresolvable";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::AllDirectionsNull: return "AllDirectionsNull";
    case ErrorCode::ZeroColumn: return "ZeroColumn";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::NonPositiveArgument: return "NonPositiveArgument";
    case ErrorCode::RateDegenerate: return "RateDegenerate";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace adjfree
