#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trajkit {

enum class ErrorCode {
  Io,
  MalformedLine,
  DimMismatch,
  UnknownCategory,
  DuplicateCategory,
  MissingEmbedding,
  BadSplit,
  BadMagic,
  VersionMismatch,
  ShapeMismatch,
  Truncated,
  NonFinite,
  ZeroNorm,
  LengthMismatch,
  EmptyInput,
  NonMonotonicFrame,
  InvalidConfig,
  MissingWeights,
  Diverged,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in trajkit is reported as an Error carrying a
/// machine-readable code; the message holds the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace trajkit
