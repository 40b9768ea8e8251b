#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stackcast {

enum class ErrorCode {
  kMissingColumn,
  kEmptyFile,
  kDuplicateTimestamp,
  kParseError,
  kIoError,
  kAllMissingColumn,
  kEmptyRange,
  kUnknownColumn,
  kFrameTooShort,
  kDegenerateSplit,
  kConfigInvalid,
  kSampleBudgetExceedsData,
  kDimensionMismatch,
  kCacheMismatch,
  kTooFewSamples,
  kEmptyOof,
  kLengthMismatch,
  kEmpty,
  kZeroVariance,
  kSchemaMismatch,
  kFormatError,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception type; `code()`
// identifies the contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stackcast
