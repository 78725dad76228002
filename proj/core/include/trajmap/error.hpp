#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trajmap {

enum class ErrorCode {
  // ckptstore
  IoError,
  InvalidTensor,
  InvalidCheckpoint,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  LayoutMismatch,
  DuplicateIndex,
  InvalidManifest,
  EmptySelection,
  // kernel / hallmarks
  OriginOutOfRange,
  EmptyTrajectory,
  DegenerateVector,
  InsufficientPoints,
  // spectral
  NotSymmetric,
  NoConvergence,
  NegativeGramEigenvalue,
  // theory / trajgen
  InvalidSpec,
  NonFiniteIterate,
  BoundViolation,
  NonFiniteLoss,
  // report_cli
  InvalidStyle,
  NoMeasuresRequested,
  UsageError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Process exit code for a failure of this kind: 1 usage, 2 data, 3 invariant.
int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace trajmap
