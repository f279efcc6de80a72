#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace insdet {

// Machine-readable rejection reasons. Every reader and validator maps each
// failure onto exactly one of these.
enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kEmptyInput,
  kEmptyProposal,
  kDegenerateScale,
  kDimMismatch,
  kZeroNorm,
  kIo,
  kDecode,
  kMissingPath,
  kBadMagic,
  kUnsupportedVersion,
  kTruncatedHeader,
  kPayloadLengthMismatch,
  kNonFiniteValue,
  kDuplicateId,
  kUnknownId,
  kMalformedBbox,
  kSchema,
  kVersionMismatch,
  kMissingBox,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kEmptyProposal: return "empty_proposal";
    case ErrorCode::kDegenerateScale: return "degenerate_scale";
    case ErrorCode::kDimMismatch: return "dim_mismatch";
    case ErrorCode::kZeroNorm: return "zero_norm";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kDecode: return "decode_error";
    case ErrorCode::kMissingPath: return "missing_path";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kTruncatedHeader: return "truncated_header";
    case ErrorCode::kPayloadLengthMismatch: return "payload_length_mismatch";
    case ErrorCode::kNonFiniteValue: return "non_finite_value";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kUnknownId: return "unknown_id";
    case ErrorCode::kMalformedBbox: return "malformed_bbox";
    case ErrorCode::kSchema: return "schema_error";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kMissingBox: return "missing_box";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace insdet
