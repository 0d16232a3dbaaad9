#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taxoforge {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kDuplicate,
  kCycle,
  kDegenerate,
  kEmptyOverlap,
  kConflict,
  kExpired,
  kParse,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kCycle: return "cycle";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kEmptyOverlap: return "empty overlap";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kExpired: return "expired";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "io error";
  }
  return "error";
}

/// Every failure raised by the library carries a code so callers (CLI exit
/// status, HTTP status) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace taxoforge
