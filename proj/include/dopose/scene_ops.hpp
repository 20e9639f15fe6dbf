#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "dopose/annotation.hpp"
#include "dopose/execution.hpp"

namespace dopose {

// `<root>/<split>/<scene>`; numeric scene names are zero-padded to six digits.
std::filesystem::path scene_directory(const std::filesystem::path &dataset_root,
                                      const std::string &split, const std::string &scene);

// Dataset root of a `<root>/<split>/<scene>` directory.
std::filesystem::path dataset_root_of(const std::filesystem::path &scene_dir);

struct PropagationSummary {
  std::size_t objects = 0;
  std::size_t views = 0;
};

// Reads the reference annotation, carries it into every view and rewrites
// scene_gt.json. The caller holds the scene lock.
// Errors: kMissingWorldTransform naming scene_world.json when the scene has
// no camera←world transforms; kMissingFile for a missing annotation.
PropagationSummary propagate_scene(const std::filesystem::path &scene_dir,
                                   const std::filesystem::path &annotation_path);

struct MaskSummary {
  std::size_t views = 0;
  std::size_t instances = 0;
};

// Renders mask/, mask_visib/ and scene_gt_info.json from scene_gt.json and the
// dataset models. The caller holds the scene lock.
// Errors: kMissingFile naming scene_gt.json; kMeshNotFound.
MaskSummary render_scene_masks(const std::filesystem::path &scene_dir,
                               const std::filesystem::path &dataset_root,
                               const GroundTruthOptions &options = {},
                               Execution exec = Execution::kParallel);

}  // namespace dopose
