#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrcp {

/// Broad failure class; the CLI maps each to a distinct exit status.
enum class ErrorCategory { usage, data, numerical };

enum class ErrorKind {
  UsageError,
  InvalidRecording,
  InvalidEvents,
  TooFewTrials,
  InvalidBand,
  UnstableDesign,
  SignalTooShort,
  SingleChannel,
  InvalidTarget,
  OnsetOutOfBounds,
  InsufficientRestData,
  ShapeMismatch,
  NonFiniteLoss,
  WindowOutOfBounds,
  DegenerateData,
  SingularAfterShrinkage,
  DimensionMismatch,
  InvalidMtry,
  LengthMismatch,
  EmptyInput,
  InvalidAlpha,
  InvalidSpec,
  InvalidConfig,
  FormatError,
  IoError,
  FingerprintMismatch,
};

std::string_view to_string(ErrorKind kind);
ErrorCategory category_of(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace mrcp
