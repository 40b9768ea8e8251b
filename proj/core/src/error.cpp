#include "stackcast/error.hpp"

namespace stackcast {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kDuplicateTimestamp: return "DuplicateTimestamp";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kAllMissingColumn: return "AllMissingColumn";
    case ErrorCode::kEmptyRange: return "EmptyRange";
    case ErrorCode::kUnknownColumn: return "UnknownColumn";
    case ErrorCode::kFrameTooShort: return "FrameTooShort";
    case ErrorCode::kDegenerateSplit: return "DegenerateSplit";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kSampleBudgetExceedsData: return "SampleBudgetExceedsData";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kCacheMismatch: return "CacheMismatch";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kEmptyOof: return "EmptyOof";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kFormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace stackcast
