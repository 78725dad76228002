#include "trajmap/error.hpp"

namespace trajmap {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidTensor: return "InvalidTensor";
    case ErrorCode::InvalidCheckpoint: return "InvalidCheckpoint";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::OriginOutOfRange: return "OriginOutOfRange";
    case ErrorCode::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NegativeGramEigenvalue: return "NegativeGramEigenvalue";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonFiniteIterate: return "NonFiniteIterate";
    case ErrorCode::BoundViolation: return "BoundViolation";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidStyle: return "InvalidStyle";
    case ErrorCode::NoMeasuresRequested: return "NoMeasuresRequested";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UsageError:
    case ErrorCode::NoMeasuresRequested:
    case ErrorCode::InvalidStyle:
      return 1;
    case ErrorCode::BoundViolation:
    case ErrorCode::NegativeGramEigenvalue:
    case ErrorCode::NoConvergence:
    case ErrorCode::NonFiniteIterate:
    case ErrorCode::NonFiniteLoss:
      return 3;
    default:
      return 2;
  }
}

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
      code_(code),
      detail_(std::move(detail)) {}

}  // namespace trajmap
