#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dopose/geometry.hpp"
#include "dopose/image.hpp"
#include "dopose/mask.hpp"
#include "dopose/renderer.hpp"

namespace dopose {

struct ViewRecord {
  int view_id = 0;
  CameraIntrinsics cam_K;
  double depth_scale = 1.0;           // mm per raw depth unit
  std::optional<Pose> world_to_cam;   // camera frame ← world frame

  friend bool operator==(const ViewRecord &, const ViewRecord &) = default;
};

struct GtEntry {
  int obj_id = 0;
  Pose cam_from_model;  // camera frame ← model frame

  friend bool operator==(const GtEntry &, const GtEntry &) = default;
};

// Visibility statistics for one ground-truth instance.
struct GtInfo {
  BoundingBox bbox_amodal;
  BoundingBox bbox_visible;
  long long px_count_amodal = 0;
  long long px_count_visible = 0;
  long long px_count_valid_depth = 0;
  double visib_fract = 0.0;

  friend bool operator==(const GtInfo &, const GtInfo &) = default;
};

struct ViewImages {
  std::filesystem::path rgb;
  std::filesystem::path depth;
};

struct SceneBundle {
  int scene_id = 0;
  std::vector<ViewRecord> views;               // ascending view_id
  std::map<int, std::vector<GtEntry>> gt;      // view_id → instances
  std::map<int, std::vector<GtInfo>> gt_info;  // view_id → per-instance stats
  std::map<int, ViewImages> images;

  // Which optional files were present on load.
  bool has_gt = false;
  bool has_gt_info = false;
  bool has_world = false;

  const ViewRecord *find_view(int view_id) const;
  const ViewRecord &view(int view_id) const;  // throws kInvalidArgument

  // Equality of all numeric content (views, gt, gt_info); paths ignored.
  bool same_content(const SceneBundle &other) const;
};

// Scene file names inside `<root>/<split>/<scene_id>/`.
namespace scene_files {
inline constexpr const char *kCamera = "scene_camera.json";
inline constexpr const char *kGt = "scene_gt.json";
inline constexpr const char *kGtInfo = "scene_gt_info.json";
inline constexpr const char *kWorld = "scene_world.json";
inline constexpr const char *kAnnotation = "scene_annotation.json";
}  // namespace scene_files

std::string view_file_stem(int view_id);                 // "000042"
std::string mask_file_name(int view_id, int gt_index);  // "000042_000003.png"
std::filesystem::path model_path(const std::filesystem::path &dataset_root, int obj_id);

/**
 * Loads one scene directory: scene_camera.json (required), rgb/ and depth/
 * images for every view (required), and the optional scene_gt.json,
 * scene_gt_info.json and scene_world.json. When scene_world.json is absent,
 * `cam_R_w2c` / `cam_t_w2c` in scene_camera.json are used if present.
 * Image width/height are taken from the depth image header.
 *
 * Errors: kMalformedFile (message names file and key path), kMissingImage,
 * kInconsistentViewIds, kDimensionMismatch.
 */
SceneBundle load_scene(const std::filesystem::path &scene_dir);

// Writes all JSON files atomically and copies referenced images that are not
// already in place. Duplicate view ids are rejected before anything is
// written. Holds the scene directory lock while writing.
void save_scene(const SceneBundle &bundle, const std::filesystem::path &scene_dir);

// Individual scene files, exposed for the pipeline steps that rewrite one.
nlohmann::ordered_json scene_gt_to_json(const std::map<int, std::vector<GtEntry>> &gt);
std::map<int, std::vector<GtEntry>> scene_gt_from_json(const nlohmann::json &doc,
                                                       const std::string &file_name);
nlohmann::ordered_json scene_gt_info_to_json(const std::map<int, std::vector<GtInfo>> &info);
std::map<int, std::vector<GtInfo>> scene_gt_info_from_json(const nlohmann::json &doc,
                                                           const std::string &file_name);
nlohmann::ordered_json scene_world_to_json(const std::vector<ViewRecord> &views);

// Numbers are written with round-trip precision.
std::string dump_json(const nlohmann::ordered_json &doc);

using MeshLibrary = std::map<int, TriangleMesh>;

// Loads `models/obj_XXXXXX.ply` for every id; throws kMeshNotFound.
MeshLibrary load_models(const std::filesystem::path &dataset_root, const std::vector<int> &obj_ids);

// mask/ and mask_visib/ files of one view, indexed by gt index.
std::vector<InstanceMask> read_view_masks(const std::filesystem::path &scene_dir, int view_id,
                                          std::size_t count, bool visible);

/**
 * COCO instance-segmentation document for one scene: one image per view, one
 * annotation per non-empty visible mask with compressed RLE segmentation,
 * tight bbox, area and the source `obj_id`. A single category
 * {id: 1, name: "object"} is used. Masks carry their gt index as instance_id.
 * Image ids equal view ids.
 */
nlohmann::ordered_json export_coco(const SceneBundle &bundle,
                                   const std::map<int, std::vector<InstanceMask>> &visible_masks);

/**
 * Every valid depth pixel becomes a point colored from `rgb`; points inside
 * mask i (0-based) get label i + 1, all others label 0. Masks must be
 * pairwise disjoint.
 */
PointCloud export_labeled_cloud(const ViewRecord &view, const DepthImage &depth,
                                const RgbImage &rgb, const std::vector<InstanceMask> &masks);

// ASCII polygon-file-format point list: x y z red green blue label.
void write_ply_cloud(const std::filesystem::path &path, const PointCloud &cloud);
PointCloud read_ply_cloud(const std::filesystem::path &path);

}  // namespace dopose
