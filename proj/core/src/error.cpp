#include "lapkit/error.hpp"

namespace lapkit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDegenerateTip: return "DegenerateTip";
    case ErrorCode::kInvalidAction: return "InvalidAction";
    case ErrorCode::kUnstableSimulation: return "UnstableSimulation";
    case ErrorCode::kCoincidentParticles: return "CoincidentParticles";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNotReset: return "NotReset";
    case ErrorCode::kActionShapeMismatch: return "ActionShapeMismatch";
    case ErrorCode::kMissingFeature: return "MissingFeature";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kUnknownEnv: return "UnknownEnv";
    case ErrorCode::kUnsupportedEnv: return "UnsupportedEnv";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kStartInCollision: return "StartInCollision";
    case ErrorCode::kCallbackFailure: return "CallbackFailure";
    case ErrorCode::kCorrupt: return "Corrupt";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kBindFailure: return "BindFailure";
  }
  return "Unknown";
}

}  // namespace lapkit
