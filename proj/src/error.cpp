#include "mrcp/error.hpp"

namespace mrcp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UsageError: return "UsageError";
    case ErrorKind::InvalidRecording: return "InvalidRecording";
    case ErrorKind::InvalidEvents: return "InvalidEvents";
    case ErrorKind::TooFewTrials: return "TooFewTrials";
    case ErrorKind::InvalidBand: return "InvalidBand";
    case ErrorKind::UnstableDesign: return "UnstableDesign";
    case ErrorKind::SignalTooShort: return "SignalTooShort";
    case ErrorKind::SingleChannel: return "SingleChannel";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::OnsetOutOfBounds: return "OnsetOutOfBounds";
    case ErrorKind::InsufficientRestData: return "InsufficientRestData";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::WindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::SingularAfterShrinkage: return "SingularAfterShrinkage";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidMtry: return "InvalidMtry";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidAlpha: return "InvalidAlpha";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FingerprintMismatch: return "FingerprintMismatch";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UsageError:
    case ErrorKind::InvalidConfig:
      return ErrorCategory::usage;
    case ErrorKind::UnstableDesign:
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::SingularAfterShrinkage:
      return ErrorCategory::numerical;
    default:
      return ErrorCategory::data;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace mrcp
