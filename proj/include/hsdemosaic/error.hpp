#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsd {

enum class ErrorCode {
  // Shape and layout problems.
  DimensionNotDivisible,
  PhaseMismatch,
  BandCountMismatch,
  ShapeMismatch,
  MisalignedPatch,
  OutOfBounds,
  EmptyInput,
  InvalidPattern,
  // Calibration.
  DegenerateWhite,
  SingularMatrix,
  NonPositiveSigma,
  // Model and training.
  InvalidFilterCount,
  CorruptCheckpoint,
  VersionMismatch,
  NonDivisibleInput,
  EmptyDataset,
  NonFiniteLoss,
  NonFiniteGradient,
  InvalidConfig,
  // Dataset.
  IncompleteSet,
  NonMonotonicWavelengths,
  SourceTooSmall,
  InsufficientArea,
  // Metrics and rendering.
  ImageTooSmall,
  EmptyRegion,
  WavelengthOutOfRange,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for failures caused by arithmetic blowing up rather than bad input.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hsd
