#include "dopose/errors.hpp"

namespace dopose {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidPose: return "InvalidPose";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kInconsistentViewIds: return "InconsistentViewIds";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kMissingWorldTransform: return "MissingWorldTransform";
    case ErrorCode::kMeshNotFound: return "MeshNotFound";
    case ErrorCode::kOverlappingMasks: return "OverlappingMasksWithinSide";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kNoPlaneFound: return "NoPlaneFound";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kSceneLocked: return "SceneLocked";
  }
  return "Unknown";
}

}  // namespace dopose
