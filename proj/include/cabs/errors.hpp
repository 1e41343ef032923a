#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cabs_eval {

enum class ErrorCode {
  kMalformedJson,
  kSchemaViolation,
  kEmptyLabel,
  kEmptyReport,
  kExtractionFailed,
  kMatchFailed,
  kLengthMismatch,
  kInvalidCounts,
  kGroupTooSmall,
  kNonPositiveRatio,
  kInvalidArgument,
  kEmptyReference,
  kDuplicateKey,
  kBadNumber,
  kEmptyCorpus,
  kInsufficientUnits,
  kMissingCell,
  kZeroVariance,
  kPoolTooSmall,
  kNoNegativeAvailable,
  kMissingPrediction,
  kMissingBinding,
  kUnparseable,
  kAuthError,
  kExhaustedRetries,
  kTimeout,
  kResponseShape,
  kRequestRejected,
  kIo,
};

/// Stable snake_case identifier used in machine-readable error bodies.
std::string_view error_code_name(ErrorCode code);

/// The single exception type of the library. `path` locates the offending
/// input element (e.g. "abnormalities[0].certainty") when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string path = {})
      : std::runtime_error(std::move(message)), code_(code), path_(std::move(path)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace cabs_eval
