#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace driveimit {

enum class ErrorCode {
  kEmptyRoadway,
  kOutOfRange,
  kParseError,
  kGapError,
  kDegenerateInput,
  kNonPositiveGap,
  kLengthMismatch,
  kNoEligibleScene,
  kSteppedAfterTermination,
  kShapeMismatch,
  kGraphReuse,
  kNonFiniteGradient,
  kTooFewSamples,
  kDegenerateComponent,
  kSingularBlock,
  kMisalignedSamples,
  kRangeMismatch,
  kArchitectureMismatch,
  kConfigError,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this exception; `code()`
// identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyRoadway: return "EmptyRoadway";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kGapError: return "GapError";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kNonPositiveGap: return "NonPositiveGap";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNoEligibleScene: return "NoEligibleScene";
    case ErrorCode::kSteppedAfterTermination: return "SteppedAfterTermination";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kGraphReuse: return "GraphReuse";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kDegenerateComponent: return "DegenerateComponent";
    case ErrorCode::kSingularBlock: return "SingularBlock";
    case ErrorCode::kMisalignedSamples: return "MisalignedSamples";
    case ErrorCode::kRangeMismatch: return "RangeMismatch";
    case ErrorCode::kArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace driveimit
