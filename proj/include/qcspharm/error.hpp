#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qcs {

enum class ErrorCode {
  ParseError,
  TopologyError,
  InvalidParameter,
  SimplificationError,
  ParamFailure,
  IllConditioned,
  RealityViolation,
  DegenerateTriangle,
  ZeroVolume,
  SchemaMismatch,
  TooFewSubjects,
  IndexOutOfRange,
  LengthMismatch,
  DegenerateData,
  MissingArtifact,
  IoError,
};

std::string_view to_string(ErrorCode code);

// All pipeline failures are reported through this type; `code()` is what the
// CLI serializes into its structured error output.
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

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace qcs
