#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace atras {

enum class ErrorKind {
  DimensionMismatch,
  LabelOutOfRange,
  InvalidBounds,
  FormatError,
  IoError,
  InsufficientData,
  InvalidArchitecture,
  InvalidConfig,
  NonFiniteLoss,
  EmptyInput,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::InvalidBounds: return "InvalidBounds";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::InvalidArchitecture: return "InvalidArchitecture";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

/// Every anticipated failure in the library surfaces as this exception.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace atras
