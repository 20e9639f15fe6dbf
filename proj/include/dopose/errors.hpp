#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dopose {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidPose,
  kDimensionMismatch,
  kMalformedFile,
  kMissingFile,
  kMissingImage,
  kInconsistentViewIds,
  kIoFailure,
  kMissingWorldTransform,
  kMeshNotFound,
  kOverlappingMasks,
  kTooFewPoints,
  kNoPlaneFound,
  kEmptyMask,
  kSceneLocked,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the toolkit are reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &message) {
  throw Error(code, message);
}

}  // namespace dopose
