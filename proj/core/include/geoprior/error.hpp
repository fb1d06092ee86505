#pragma once

#include <stdexcept>
#include <string>

namespace geoprior {

enum class ErrorCode {
  EmptyInput,
  NonFinite,
  NoConvergence,
  DimensionMismatch,
  InvalidArgument,
  OutOfDomain,
  UnknownClass,
  EmptyClass,
  ZeroSpectrum,
  MissingClass,
  ShapeMismatch,
  NoHeadClass,
  InsufficientHeadData,
  UnmatchedTail,
  NonFiniteLoss,
  ParseError,
  DimensionInconsistent,
  IoError,
  InvalidConfig,
  InsufficientModels,
};

// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorCategory { config, data, numeric };

const char* to_string(ErrorCode code) noexcept;
ErrorCategory category_of(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace geoprior
