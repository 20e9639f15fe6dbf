#include "dopose/scene_ops.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "dopose/fileio.hpp"

namespace dopose {

namespace fs = std::filesystem;

fs::path scene_directory(const fs::path &dataset_root, const std::string &split,
                         const std::string &scene) {
  if (scene.empty() || scene == "." || scene == ".." || scene.find('/') != std::string::npos)
    fail(ErrorCode::kInvalidArgument, "invalid scene name '" + scene + "'");
  const bool numeric = std::all_of(scene.begin(), scene.end(), [](char c) { return c >= '0' && c <= '9'; });
  if (numeric && scene.size() <= 6) {
    char name[16];
    std::snprintf(name, sizeof name, "%06d", std::stoi(scene));
    return dataset_root / split / name;
  }
  return dataset_root / split / scene;
}

fs::path dataset_root_of(const fs::path &scene_dir) {
  return fs::absolute(scene_dir).lexically_normal().parent_path().parent_path();
}

PropagationSummary propagate_scene(const fs::path &scene_dir, const fs::path &annotation_path) {
  const SceneBundle bundle = load_scene(scene_dir);
  if (!bundle.has_world)
    fail(ErrorCode::kMissingWorldTransform,
         (scene_dir / scene_files::kWorld).string() + " not found");
  const ReferenceAnnotation ann = read_annotation(annotation_path);
  const auto gt = propagate_poses(ann, bundle.views);
  write_file_atomic(scene_dir / scene_files::kGt, dump_json(scene_gt_to_json(gt)));
  return {ann.poses.size(), gt.size()};
}

MaskSummary render_scene_masks(const fs::path &scene_dir, const fs::path &dataset_root,
                               const GroundTruthOptions &options, Execution exec) {
  const SceneBundle bundle = load_scene(scene_dir);
  if (!bundle.has_gt)
    fail(ErrorCode::kMissingFile, (scene_dir / scene_files::kGt).string() + " not found");
  std::set<int> ids;
  for (const auto &[view, entries] : bundle.gt)
    for (const auto &e : entries) ids.insert(e.obj_id);
  const MeshLibrary meshes = load_models(dataset_root, {ids.begin(), ids.end()});
  const auto gt = generate_ground_truth(bundle, meshes, options, exec);
  write_ground_truth(scene_dir, gt);
  MaskSummary summary;
  summary.views = gt.size();
  for (const auto &v : gt) summary.instances += v.visible.size();
  return summary;
}

}  // namespace dopose
