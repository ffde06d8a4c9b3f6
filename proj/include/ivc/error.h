#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ivc {

enum class ErrorCode {
  MalformedHeader,
  SizeMismatch,
  IoFailure,
  InvalidData,
  OutOfBounds,
  InvalidWindow,
  SeedNotInLumen,
  EmptyMask,
  MaskTouchesBoundary,
  AllForeground,
  InvalidDirection,
  SeedOutsideLumen,
  SeedsNotConnected,
  SeedsCoincident,
  OutOfRange,
  InvalidLevel,
  InvalidSaturation,
  RayMiss,
  StaleBookmark,
  UnknownBookmark,
  MeasurementNotStarted,
  OutOfOrderEvent,
  CorruptLog,
  ProtocolViolation,
  BindFailure,
  UnresolvablePolyp,
  InvalidSpec,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidData: return "InvalidData";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::SeedNotInLumen: return "SeedNotInLumen";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::MaskTouchesBoundary: return "MaskTouchesBoundary";
    case ErrorCode::AllForeground: return "AllForeground";
    case ErrorCode::InvalidDirection: return "InvalidDirection";
    case ErrorCode::SeedOutsideLumen: return "SeedOutsideLumen";
    case ErrorCode::SeedsNotConnected: return "SeedsNotConnected";
    case ErrorCode::SeedsCoincident: return "SeedsCoincident";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidLevel: return "InvalidLevel";
    case ErrorCode::InvalidSaturation: return "InvalidSaturation";
    case ErrorCode::RayMiss: return "RayMiss";
    case ErrorCode::StaleBookmark: return "StaleBookmark";
    case ErrorCode::UnknownBookmark: return "UnknownBookmark";
    case ErrorCode::MeasurementNotStarted: return "MeasurementNotStarted";
    case ErrorCode::OutOfOrderEvent: return "OutOfOrderEvent";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::UnresolvablePolyp: return "UnresolvablePolyp";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

}  // namespace ivc
