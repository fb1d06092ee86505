#include "geoprior/error.hpp"

namespace geoprior {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::ZeroSpectrum: return "ZeroSpectrum";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NoHeadClass: return "NoHeadClass";
    case ErrorCode::InsufficientHeadData: return "InsufficientHeadData";
    case ErrorCode::UnmatchedTail: return "UnmatchedTail";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionInconsistent: return "DimensionInconsistent";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InsufficientModels: return "InsufficientModels";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InsufficientModels:
      return ErrorCategory::config;
    case ErrorCode::NoConvergence:
    case ErrorCode::NonFinite:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::ZeroSpectrum:
      return ErrorCategory::numeric;
    default:
      return ErrorCategory::data;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace geoprior
