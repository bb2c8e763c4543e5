#include "hsdemosaic/error.hpp"

namespace hsd {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionNotDivisible: return "DimensionNotDivisible";
    case ErrorCode::PhaseMismatch: return "PhaseMismatch";
    case ErrorCode::BandCountMismatch: return "BandCountMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MisalignedPatch: return "MisalignedPatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidPattern: return "InvalidPattern";
    case ErrorCode::DegenerateWhite: return "DegenerateWhite";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::InvalidFilterCount: return "InvalidFilterCount";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::NonDivisibleInput: return "NonDivisibleInput";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IncompleteSet: return "IncompleteSet";
    case ErrorCode::NonMonotonicWavelengths: return "NonMonotonicWavelengths";
    case ErrorCode::SourceTooSmall: return "SourceTooSmall";
    case ErrorCode::InsufficientArea: return "InsufficientArea";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::WavelengthOutOfRange: return "WavelengthOutOfRange";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) noexcept {
  return code == ErrorCode::NonFiniteLoss || code == ErrorCode::NonFiniteGradient ||
         code == ErrorCode::SingularMatrix;
}

}  // namespace hsd
