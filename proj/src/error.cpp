#include "hsd/error.hpp"

namespace hsd {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kSchemeMismatch: return "SchemeMismatch";
    case ErrorCode::kClassTooSmall: return "ClassTooSmall";
    case ErrorCode::kIdOutOfRange: return "IdOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kMissingTensor: return "MissingTensor";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kUsage: return "Usage";
  }
  return "Unknown";
}

}  // namespace hsd
