#pragma once

#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cotprobe {

enum class ErrorCode {
  kMalformedTrace,
  kEmptyTrace,
  kConfigError,
  kJudgeParseError,
  kJudgeAlignmentError,
  kJudgeUnavailable,
  kAlignmentError,
  kDataError,
  kShapeError,
  kDegenerateLabels,
  kGridError,
  kParseError,
  kDuplicateId,
  kCorruptEmbedding,
  kUnsupportedFormat,
  kUnsupportedVersion,
  kIoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedTrace: return "MalformedTrace";
    case ErrorCode::kEmptyTrace: return "EmptyTrace";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kJudgeParseError: return "JudgeParseError";
    case ErrorCode::kJudgeAlignmentError: return "JudgeAlignmentError";
    case ErrorCode::kJudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::kAlignmentError: return "AlignmentError";
    case ErrorCode::kDataError: return "DataError";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kGridError: return "GridError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kCorruptEmbedding: return "CorruptEmbedding";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's exit-code mapping) can dispatch without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {
inline bool& warnings_enabled() {
  static bool enabled = true;
  return enabled;
}
}  // namespace detail

inline void set_warnings_enabled(bool enabled) { detail::warnings_enabled() = enabled; }

inline void warn(std::string_view message) {
  if (detail::warnings_enabled()) std::cerr << "warning: " << message << '\n';
}

}  // namespace cotprobe
