#pragma once

#include <stdexcept>
#include <string>

namespace hsd {

// Machine-readable error codes. The CLI reports them on stderr as JSON.
enum class ErrorCode {
  kInvalidConfig,
  kMalformedRow,
  kUnknownLabel,
  kEmptyFile,
  kSchemeMismatch,
  kClassTooSmall,
  kIdOutOfRange,
  kShapeMismatch,
  kMissingTensor,
  kNonFiniteLoss,
  kIoFailure,
  kVersionMismatch,
  kLengthMismatch,
  kEmptyInput,
  kMissingColumn,
  kUsage,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  const char* code_name() const noexcept { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace hsd
