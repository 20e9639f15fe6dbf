#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dopose/bop.hpp"
#include "dopose/execution.hpp"

namespace dopose {

struct ObjectPose {
  int obj_id = 0;
  Pose cam_from_model;

  friend bool operator==(const ObjectPose &, const ObjectPose &) = default;
};

// Poses annotated by hand in one reference view of a scene.
struct ReferenceAnnotation {
  int scene_id = 0;
  int ref_view_id = 0;
  std::vector<ObjectPose> poses;

  friend bool operator==(const ReferenceAnnotation &, const ReferenceAnnotation &) = default;
};

// {"scene_id", "ref_view_id", "poses": [{"obj_id", "cam_R_m2c", "cam_t_m2c"}]}
nlohmann::ordered_json annotation_to_json(const ReferenceAnnotation &ann);
ReferenceAnnotation annotation_from_json(const nlohmann::json &doc,
                                         const std::string &source = "annotation");
ReferenceAnnotation read_annotation(const std::filesystem::path &path);
void write_annotation(const std::filesystem::path &path, const ReferenceAnnotation &ann);

/**
 * Carries the reference poses into every view through the camera←world
 * transforms:
 *
 *   pose_i = world_to_cam_i ∘ world_to_cam_ref⁻¹ ∘ pose_ref
 *
 * Purely kinematic, no per-view refinement. Throws kMissingWorldTransform
 * naming the view, or kInvalidArgument if the reference view is not listed.
 */
std::map<int, std::vector<GtEntry>> propagate_poses(const ReferenceAnnotation &ann,
                                                    std::span<const ViewRecord> views);

struct ViewGroundTruth {
  int view_id = 0;
  std::vector<InstanceMask> visible;  // indexed by gt index
  std::vector<InstanceMask> amodal;
  std::vector<GtInfo> info;
};

struct GroundTruthOptions {
  // Count px_count_valid_depth against the captured depth images. When false
  // (or the image is unavailable) rendered depth stands in for the capture.
  bool use_captured_depth = true;
  // Render at a different resolution; intrinsics are rescaled.
  std::optional<std::pair<int, int>> resolution;
};

// Tight boxes, pixel counts and visib_fract from a mask pair.
GtInfo compute_gt_info(const InstanceMask &visible, const InstanceMask &amodal,
                       const DepthImage *captured_depth);

/**
 * Renders every gt instance of every view and composites them under a global
 * depth test. Views are processed independently (OpenMP over views in
 * kParallel). Throws kMeshNotFound for an obj_id missing from `meshes`.
 */
std::vector<ViewGroundTruth> generate_ground_truth(const SceneBundle &scene,
                                                   const MeshLibrary &meshes,
                                                   const GroundTruthOptions &options = {},
                                                   Execution exec = Execution::kParallel);

// Writes mask/, mask_visib/ (8-bit, 255 inside) and scene_gt_info.json.
void write_ground_truth(const std::filesystem::path &scene_dir,
                        const std::vector<ViewGroundTruth> &ground_truth);

}  // namespace dopose
