#include "trajkit/error.hpp"

namespace trajkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::DuplicateCategory: return "DuplicateCategory";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::BadSplit: return "BadSplit";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonMonotonicFrame: return "NonMonotonicFrame";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingWeights: return "MissingWeights";
    case ErrorCode::Diverged: return "Diverged";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace trajkit
