#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lapkit {

enum class ErrorCode {
  kDegenerateTip,
  kInvalidAction,
  kUnstableSimulation,
  kCoincidentParticles,
  kInvalidConfig,
  kNotReset,
  kActionShapeMismatch,
  kMissingFeature,
  kIndexOutOfRange,
  kUnknownEnv,
  kUnsupportedEnv,
  kBehindCamera,
  kResolutionMismatch,
  kNotFound,
  kStartInCollision,
  kCallbackFailure,
  kCorrupt,
  kVersionMismatch,
  kIo,
  kBindFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
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

}  // namespace lapkit
