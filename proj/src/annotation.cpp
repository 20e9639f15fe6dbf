#include "dopose/annotation.hpp"

#include <exception>
#include <string>

#include "dopose/fileio.hpp"

namespace dopose {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

ordered_json annotation_to_json(const ReferenceAnnotation &ann) {
  ordered_json doc;
  doc["scene_id"] = ann.scene_id;
  doc["ref_view_id"] = ann.ref_view_id;
  ordered_json poses = ordered_json::array();
  for (const auto &p : ann.poses) {
    ordered_json item;
    item["obj_id"] = p.obj_id;
    item["cam_R_m2c"] = p.cam_from_model.rotation_row_major();
    item["cam_t_m2c"] = p.cam_from_model.translation_array();
    poses.push_back(std::move(item));
  }
  doc["poses"] = std::move(poses);
  return doc;
}

ReferenceAnnotation annotation_from_json(const json &doc, const std::string &source) {
  const auto bad = [&](const std::string &what) {
    fail(ErrorCode::kMalformedFile, source + ": " + what);
  };
  if (!doc.is_object()) bad("expected an object");
  ReferenceAnnotation ann;
  if (doc.contains("scene_id")) {
    if (!doc["scene_id"].is_number_integer()) bad("/scene_id: expected an integer");
    ann.scene_id = doc["scene_id"].get<int>();
  }
  if (!doc.contains("ref_view_id") || !doc["ref_view_id"].is_number_integer())
    bad("/ref_view_id: expected an integer");
  ann.ref_view_id = doc["ref_view_id"].get<int>();
  if (!doc.contains("poses") || !doc["poses"].is_array()) bad("/poses: expected an array");
  const json &poses = doc["poses"];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const std::string where = "/poses/" + std::to_string(i);
    const json &item = poses[i];
    if (!item.is_object() || !item.contains("obj_id") || !item["obj_id"].is_number_integer())
      bad(where + "/obj_id: expected an integer");
    const auto numbers = [&](const char *key, std::size_t n) {
      if (!item.contains(key) || !item[key].is_array() || item[key].size() != n)
        bad(where + "/" + key + ": expected " + std::to_string(n) + " numbers");
      std::vector<double> out;
      for (const auto &v : item[key]) {
        if (!v.is_number()) bad(where + "/" + key + ": non-numeric entry");
        out.push_back(v.get<double>());
      }
      return out;
    };
    const auto r = numbers("cam_R_m2c", 9);
    const auto t = numbers("cam_t_m2c", 3);
    try {
      ann.poses.push_back({item["obj_id"].get<int>(), Pose::from_arrays(r, t)});
    } catch (const Error &e) {
      if (e.code() == ErrorCode::kInvalidPose) throw Error(e.code(), source + where + ": " + e.what());
      throw;
    }
  }
  return ann;
}

ReferenceAnnotation read_annotation(const fs::path &path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    fail(ErrorCode::kMalformedFile, path.string() + ": " + e.what());
  }
  return annotation_from_json(doc, path.filename().string());
}

void write_annotation(const fs::path &path, const ReferenceAnnotation &ann) {
  write_file_atomic(path, dump_json(annotation_to_json(ann)));
}

std::map<int, std::vector<GtEntry>> propagate_poses(const ReferenceAnnotation &ann,
                                                    std::span<const ViewRecord> views) {
  const ViewRecord *ref = nullptr;
  for (const auto &v : views)
    if (v.view_id == ann.ref_view_id) ref = &v;
  if (!ref)
    fail(ErrorCode::kInvalidArgument,
         "reference view " + std::to_string(ann.ref_view_id) + " is not part of the scene");
  for (const auto &v : views)
    if (!v.world_to_cam)
      fail(ErrorCode::kMissingWorldTransform,
           "view " + std::to_string(v.view_id) + " has no world transform");

  // Object poses expressed in the world frame, computed once.
  const Pose cam_ref_to_world = invert(*ref->world_to_cam);
  std::vector<GtEntry> in_world;
  in_world.reserve(ann.poses.size());
  for (const auto &p : ann.poses) in_world.push_back({p.obj_id, compose(cam_ref_to_world, p.cam_from_model)});

  std::map<int, std::vector<GtEntry>> out;
  for (const auto &v : views) {
    auto &entries = out[v.view_id];
    if (v.view_id == ann.ref_view_id) {
      // The reference view keeps the annotation verbatim.
      for (const auto &p : ann.poses) entries.push_back({p.obj_id, p.cam_from_model});
      continue;
    }
    for (const auto &w : in_world) entries.push_back({w.obj_id, compose(*v.world_to_cam, w.cam_from_model)});
  }
  return out;
}

GtInfo compute_gt_info(const InstanceMask &visible, const InstanceMask &amodal,
                       const DepthImage *captured_depth) {
  GtInfo info;
  info.bbox_amodal = amodal.bbox();
  info.bbox_visible = visible.bbox();
  info.px_count_amodal = amodal.area();
  info.px_count_visible = visible.area();
  if (captured_depth) {
    if (!captured_depth->same_shape(amodal.width(), amodal.height()))
      fail(ErrorCode::kDimensionMismatch, "captured depth differs from the mask size");
    long long valid = 0;
    for (std::size_t i = 0; i < captured_depth->size(); ++i)
      valid += amodal.test_index(i) && (*captured_depth)[i] != 0;
    info.px_count_valid_depth = valid;
  } else {
    info.px_count_valid_depth = info.px_count_amodal;
  }
  info.visib_fract = info.px_count_amodal > 0
                         ? static_cast<double>(info.px_count_visible) /
                               static_cast<double>(info.px_count_amodal)
                         : 0.0;
  return info;
}

std::vector<ViewGroundTruth> generate_ground_truth(const SceneBundle &scene,
                                                   const MeshLibrary &meshes,
                                                   const GroundTruthOptions &options,
                                                   Execution exec) {
  for (const auto &[view_id, entries] : scene.gt)
    for (const auto &e : entries)
      if (!meshes.count(e.obj_id))
        fail(ErrorCode::kMeshNotFound, "no mesh loaded for obj_id " + std::to_string(e.obj_id));

  std::vector<const ViewRecord *> views;
  for (const auto &v : scene.views)
    if (scene.gt.count(v.view_id)) views.push_back(&v);

  std::vector<ViewGroundTruth> out(views.size());
  std::vector<std::exception_ptr> errors(views.size());

  const auto process = [&](std::size_t i) {
    const ViewRecord &view = *views[i];
    CameraIntrinsics k = view.cam_K;
    if (options.resolution) k = k.resized(options.resolution->first, options.resolution->second);
    const auto &entries = scene.gt.at(view.view_id);

    std::vector<std::pair<int, DepthBuffer>> buffers;
    buffers.reserve(entries.size());
    for (std::size_t g = 0; g < entries.size(); ++g)
      buffers.emplace_back(static_cast<int>(g), rasterize(meshes.at(entries[g].obj_id),
                                                          entries[g].cam_from_model, k,
                                                          Execution::kSerial));
    CompositedMasks masks = composite_visible_masks(buffers);

    std::optional<DepthImage> captured;
    if (options.use_captured_depth && !options.resolution) {
      const auto it = scene.images.find(view.view_id);
      if (it != scene.images.end() && fs::exists(it->second.depth)) captured = read_depth(it->second.depth);
    }

    ViewGroundTruth &gt = out[i];
    gt.view_id = view.view_id;
    for (std::size_t g = 0; g < entries.size(); ++g)
      gt.info.push_back(compute_gt_info(masks.visible[g], masks.amodal[g],
                                        captured ? &*captured : nullptr));
    gt.visible = std::move(masks.visible);
    gt.amodal = std::move(masks.amodal);
  };

  const auto guarded = [&](std::size_t i) {
    try {
      process(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const auto n = static_cast<std::ptrdiff_t>(views.size());
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) guarded(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) guarded(static_cast<std::size_t>(i));
  }
  // Report the failure of the lowest view, independent of the schedule.
  for (const auto &error : errors)
    if (error) std::rethrow_exception(error);
  return out;
}

void write_ground_truth(const fs::path &scene_dir, const std::vector<ViewGroundTruth> &ground_truth) {
  std::map<int, std::vector<GtInfo>> info;
  for (const auto &view : ground_truth) {
    for (std::size_t g = 0; g < view.visible.size(); ++g) {
      const std::string name = mask_file_name(view.view_id, static_cast<int>(g));
      write_gray(scene_dir / "mask" / name, view.amodal[g].to_image());
      write_gray(scene_dir / "mask_visib" / name, view.visible[g].to_image());
    }
    info[view.view_id] = view.info;
  }
  write_file_atomic(scene_dir / scene_files::kGtInfo, dump_json(scene_gt_info_to_json(info)));
}

}  // namespace dopose
