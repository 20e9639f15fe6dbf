#include "dopose/bop.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include "dopose/fileio.hpp"

namespace dopose {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void malformed(const std::string &file, const std::string &where,
                            const std::string &what) {
  fail(ErrorCode::kMalformedFile, file + ": " + where + ": " + what);
}

int parse_view_key(const std::string &key, const std::string &file) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), value);
  if (ec != std::errc{} || ptr != key.data() + key.size() || value < 0)
    malformed(file, "key '" + key + "'", "not a view id");
  return value;
}

std::vector<double> number_array(const json &node, std::size_t expected, const std::string &file,
                                 const std::string &where) {
  if (!node.is_array() || node.size() != expected)
    malformed(file, where, "expected an array of " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  out.reserve(expected);
  for (const auto &v : node) {
    if (!v.is_number()) malformed(file, where, "non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

const json &require(const json &obj, const char *key, const std::string &file,
                    const std::string &where) {
  if (!obj.is_object()) malformed(file, where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) malformed(file, where, std::string("missing '") + key + "'");
  return *it;
}

Pose parse_pose(const json &obj, const char *r_key, const char *t_key, const std::string &file,
                const std::string &where) {
  const auto r = number_array(require(obj, r_key, file, where), 9, file, where + "/" + r_key);
  const auto t = number_array(require(obj, t_key, file, where), 3, file, where + "/" + t_key);
  try {
    return Pose::from_arrays(r, t);
  } catch (const Error &e) {
    malformed(file, where, e.what());
  }
}

json parse_json_file(const fs::path &path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    fail(ErrorCode::kMalformedFile, path.string() + ": " + e.what());
  }
}

template <typename Map>
void check_keys_subset(const Map &map, const std::set<int> &view_ids, const std::string &file) {
  for (const auto &[id, value] : map)
    if (!view_ids.count(id))
      fail(ErrorCode::kInconsistentViewIds,
           file + ": view " + std::to_string(id) + " is not listed in scene_camera.json");
}

ordered_json bbox_json(const BoundingBox &b) { return ordered_json::array({b.x, b.y, b.w, b.h}); }

BoundingBox parse_bbox(const json &node, const std::string &file, const std::string &where) {
  const auto v = number_array(node, 4, file, where);
  return {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
          static_cast<int>(v[3])};
}

fs::path find_rgb(const fs::path &scene_dir, int view_id) {
  for (const char *ext : {".png", ".jpg", ".jpeg", ".tif"}) {
    fs::path p = scene_dir / "rgb" / (view_file_stem(view_id) + ext);
    if (fs::exists(p)) return p;
  }
  return {};
}

}  // namespace

const ViewRecord *SceneBundle::find_view(int view_id) const {
  const auto it = std::find_if(views.begin(), views.end(),
                               [view_id](const ViewRecord &v) { return v.view_id == view_id; });
  return it == views.end() ? nullptr : &*it;
}

const ViewRecord &SceneBundle::view(int view_id) const {
  const ViewRecord *v = find_view(view_id);
  if (!v) fail(ErrorCode::kInvalidArgument, "unknown view " + std::to_string(view_id));
  return *v;
}

bool SceneBundle::same_content(const SceneBundle &other) const {
  return scene_id == other.scene_id && views == other.views && gt == other.gt &&
         gt_info == other.gt_info;
}

std::string view_file_stem(int view_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d", view_id);
  return buf;
}

std::string mask_file_name(int view_id, int gt_index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%06d_%06d.png", view_id, gt_index);
  return buf;
}

fs::path model_path(const fs::path &dataset_root, int obj_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "obj_%06d.ply", obj_id);
  return dataset_root / "models" / buf;
}

std::string dump_json(const ordered_json &doc) { return doc.dump(2) + "\n"; }

ordered_json scene_gt_to_json(const std::map<int, std::vector<GtEntry>> &gt) {
  ordered_json doc = ordered_json::object();
  for (const auto &[view_id, entries] : gt) {
    ordered_json list = ordered_json::array();
    for (const auto &e : entries) {
      ordered_json item;
      item["cam_R_m2c"] = e.cam_from_model.rotation_row_major();
      item["cam_t_m2c"] = e.cam_from_model.translation_array();
      item["obj_id"] = e.obj_id;
      list.push_back(std::move(item));
    }
    doc[std::to_string(view_id)] = std::move(list);
  }
  return doc;
}

std::map<int, std::vector<GtEntry>> scene_gt_from_json(const json &doc, const std::string &file) {
  if (!doc.is_object()) malformed(file, "/", "expected an object keyed by view id");
  std::map<int, std::vector<GtEntry>> gt;
  for (const auto &[key, list] : doc.items()) {
    const int view_id = parse_view_key(key, file);
    if (!list.is_array()) malformed(file, "/" + key, "expected an array");
    auto &entries = gt[view_id];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "/" + key + "/" + std::to_string(i);
      const json &obj_id = require(list[i], "obj_id", file, where);
      if (!obj_id.is_number_integer()) malformed(file, where + "/obj_id", "expected an integer");
      entries.push_back({obj_id.get<int>(), parse_pose(list[i], "cam_R_m2c", "cam_t_m2c", file, where)});
    }
  }
  return gt;
}

ordered_json scene_gt_info_to_json(const std::map<int, std::vector<GtInfo>> &info) {
  ordered_json doc = ordered_json::object();
  for (const auto &[view_id, entries] : info) {
    ordered_json list = ordered_json::array();
    for (const auto &e : entries) {
      ordered_json item;
      item["bbox_obj"] = bbox_json(e.bbox_amodal);
      item["bbox_visib"] = bbox_json(e.bbox_visible);
      item["px_count_all"] = e.px_count_amodal;
      item["px_count_valid"] = e.px_count_valid_depth;
      item["px_count_visib"] = e.px_count_visible;
      item["visib_fract"] = e.visib_fract;
      list.push_back(std::move(item));
    }
    doc[std::to_string(view_id)] = std::move(list);
  }
  return doc;
}

std::map<int, std::vector<GtInfo>> scene_gt_info_from_json(const json &doc,
                                                           const std::string &file) {
  if (!doc.is_object()) malformed(file, "/", "expected an object keyed by view id");
  std::map<int, std::vector<GtInfo>> info;
  for (const auto &[key, list] : doc.items()) {
    const int view_id = parse_view_key(key, file);
    if (!list.is_array()) malformed(file, "/" + key, "expected an array");
    auto &entries = info[view_id];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "/" + key + "/" + std::to_string(i);
      const json &item = list[i];
      GtInfo g;
      g.bbox_amodal = parse_bbox(require(item, "bbox_obj", file, where), file, where + "/bbox_obj");
      g.bbox_visible =
          parse_bbox(require(item, "bbox_visib", file, where), file, where + "/bbox_visib");
      const auto count = [&](const char *k) {
        const json &n = require(item, k, file, where);
        if (!n.is_number()) malformed(file, where + "/" + k, "expected a number");
        return n.get<long long>();
      };
      g.px_count_amodal = count("px_count_all");
      g.px_count_valid_depth = count("px_count_valid");
      g.px_count_visible = count("px_count_visib");
      const json &vf = require(item, "visib_fract", file, where);
      if (!vf.is_number()) malformed(file, where + "/visib_fract", "expected a number");
      g.visib_fract = vf.get<double>();
      entries.push_back(g);
    }
  }
  return info;
}

ordered_json scene_world_to_json(const std::vector<ViewRecord> &views) {
  ordered_json doc = ordered_json::object();
  for (const auto &v : views) {
    if (!v.world_to_cam) continue;
    ordered_json item;
    item["rotation"] = v.world_to_cam->rotation_row_major();
    item["translation"] = v.world_to_cam->translation_array();
    doc[std::to_string(v.view_id)] = std::move(item);
  }
  return doc;
}

SceneBundle load_scene(const fs::path &scene_dir) {
  SceneBundle bundle;
  {
    const std::string name = scene_dir.filename().string();
    int id = 0;
    const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), id);
    bundle.scene_id = (ec == std::errc{} && ptr == name.data() + name.size()) ? id : 0;
  }

  const fs::path camera_path = scene_dir / scene_files::kCamera;
  if (!fs::exists(camera_path))
    fail(ErrorCode::kMissingFile, "missing " + camera_path.string());
  const json camera = parse_json_file(camera_path);
  const std::string camera_file = scene_files::kCamera;
  if (!camera.is_object()) malformed(camera_file, "/", "expected an object keyed by view id");

  std::map<int, Pose> camera_world;  // optional cam_R_w2c / cam_t_w2c
  for (const auto &[key, entry] : camera.items()) {
    const int view_id = parse_view_key(key, camera_file);
    const std::string where = "view " + key;
    const auto k = number_array(require(entry, "cam_K", camera_file, where), 9, camera_file,
                                where + "/cam_K");
    const json &scale = require(entry, "depth_scale", camera_file, where);
    if (!scale.is_number() || !(scale.get<double>() > 0.0))
      malformed(camera_file, where + "/depth_scale", "expected a positive number");
    if (entry.contains("cam_R_w2c") && entry.contains("cam_t_w2c"))
      camera_world.emplace(view_id, parse_pose(entry, "cam_R_w2c", "cam_t_w2c", camera_file, where));

    ViewImages images;
    images.depth = scene_dir / "depth" / (view_file_stem(view_id) + ".png");
    images.rgb = find_rgb(scene_dir, view_id);
    if (!fs::exists(images.depth))
      fail(ErrorCode::kMissingImage, "missing depth image " + images.depth.string());
    if (images.rgb.empty())
      fail(ErrorCode::kMissingImage,
           "missing rgb image for view " + key + " in " + (scene_dir / "rgb").string());
    const auto [w, h] = image_dimensions(images.depth);
    if (image_dimensions(images.rgb) != std::make_pair(w, h))
      fail(ErrorCode::kDimensionMismatch,
           "rgb and depth images of view " + key + " differ in size");

    ViewRecord view;
    view.view_id = view_id;
    try {
      view.cam_K = CameraIntrinsics::from_matrix(k, w, h);
    } catch (const Error &e) {
      malformed(camera_file, where + "/cam_K", e.what());
    }
    view.depth_scale = scale.get<double>();
    bundle.views.push_back(view);
    bundle.images.emplace(view_id, std::move(images));
  }
  std::sort(bundle.views.begin(), bundle.views.end(),
            [](const ViewRecord &a, const ViewRecord &b) { return a.view_id < b.view_id; });
  std::set<int> view_ids;
  for (const auto &v : bundle.views) view_ids.insert(v.view_id);

  const fs::path gt_path = scene_dir / scene_files::kGt;
  if (fs::exists(gt_path)) {
    bundle.gt = scene_gt_from_json(parse_json_file(gt_path), scene_files::kGt);
    check_keys_subset(bundle.gt, view_ids, scene_files::kGt);
    bundle.has_gt = true;
  }

  const fs::path info_path = scene_dir / scene_files::kGtInfo;
  if (fs::exists(info_path)) {
    bundle.gt_info = scene_gt_info_from_json(parse_json_file(info_path), scene_files::kGtInfo);
    check_keys_subset(bundle.gt_info, view_ids, scene_files::kGtInfo);
    for (const auto &[id, entries] : bundle.gt_info) {
      const auto it = bundle.gt.find(id);
      const std::size_t expected = it == bundle.gt.end() ? 0 : it->second.size();
      if (entries.size() != expected)
        fail(ErrorCode::kInconsistentViewIds,
             std::string(scene_files::kGtInfo) + ": view " + std::to_string(id) + " has " +
                 std::to_string(entries.size()) + " entries but scene_gt.json has " +
                 std::to_string(expected));
    }
    bundle.has_gt_info = true;
  }

  const fs::path world_path = scene_dir / scene_files::kWorld;
  if (fs::exists(world_path)) {
    const json world = parse_json_file(world_path);
    const std::string file = scene_files::kWorld;
    if (!world.is_object()) malformed(file, "/", "expected an object keyed by view id");
    for (const auto &[key, entry] : world.items()) {
      const int view_id = parse_view_key(key, file);
      if (!view_ids.count(view_id))
        fail(ErrorCode::kInconsistentViewIds,
             file + ": view " + key + " is not listed in scene_camera.json");
      const Pose pose = parse_pose(entry, "rotation", "translation", file, "view " + key);
      for (auto &v : bundle.views)
        if (v.view_id == view_id) v.world_to_cam = pose;
    }
    bundle.has_world = true;
  } else if (!camera_world.empty()) {
    for (auto &v : bundle.views) {
      const auto it = camera_world.find(v.view_id);
      if (it != camera_world.end()) v.world_to_cam = it->second;
    }
    bundle.has_world = true;
  }
  return bundle;
}

void save_scene(const SceneBundle &bundle, const fs::path &scene_dir) {
  std::set<int> view_ids;
  for (const auto &v : bundle.views) {
    if (!view_ids.insert(v.view_id).second)
      fail(ErrorCode::kInconsistentViewIds, "duplicate view id " + std::to_string(v.view_id));
    if (!(v.depth_scale > 0.0))
      fail(ErrorCode::kInvalidArgument,
           "view " + std::to_string(v.view_id) + " has a non-positive depth_scale");
  }
  check_keys_subset(bundle.gt, view_ids, scene_files::kGt);
  check_keys_subset(bundle.gt_info, view_ids, scene_files::kGtInfo);

  std::vector<ViewRecord> sorted = bundle.views;
  std::sort(sorted.begin(), sorted.end(),
            [](const ViewRecord &a, const ViewRecord &b) { return a.view_id < b.view_id; });

  std::error_code ec;
  fs::create_directories(scene_dir, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot create " + scene_dir.string() + ": " + ec.message());
  const DirectoryLock lock(scene_dir);

  ordered_json camera = ordered_json::object();
  for (const auto &v : sorted) {
    ordered_json item;
    item["cam_K"] = v.cam_K.matrix_row_major();
    item["depth_scale"] = v.depth_scale;
    camera[std::to_string(v.view_id)] = std::move(item);
  }
  write_file_atomic(scene_dir / scene_files::kCamera, dump_json(camera));
  if (bundle.has_gt || !bundle.gt.empty())
    write_file_atomic(scene_dir / scene_files::kGt, dump_json(scene_gt_to_json(bundle.gt)));
  if (bundle.has_gt_info || !bundle.gt_info.empty())
    write_file_atomic(scene_dir / scene_files::kGtInfo,
                      dump_json(scene_gt_info_to_json(bundle.gt_info)));
  const bool any_world = std::any_of(sorted.begin(), sorted.end(),
                                     [](const ViewRecord &v) { return v.world_to_cam.has_value(); });
  if (any_world)
    write_file_atomic(scene_dir / scene_files::kWorld, dump_json(scene_world_to_json(sorted)));

  for (const auto &[view_id, images] : bundle.images) {
    const auto copy = [&](const fs::path &src, const fs::path &dst) {
      if (src.empty() || !fs::exists(src)) return;
      if (fs::exists(dst) && fs::equivalent(src, dst)) return;
      fs::create_directories(dst.parent_path());
      fs::copy_file(src, dst, fs::copy_options::overwrite_existing, ec);
      if (ec) fail(ErrorCode::kIoFailure, "cannot copy " + src.string() + ": " + ec.message());
    };
    copy(images.rgb, scene_dir / "rgb" / (view_file_stem(view_id) + images.rgb.extension().string()));
    copy(images.depth, scene_dir / "depth" / (view_file_stem(view_id) + ".png"));
  }
}

MeshLibrary load_models(const fs::path &dataset_root, const std::vector<int> &obj_ids) {
  MeshLibrary meshes;
  for (int id : obj_ids) {
    if (meshes.count(id)) continue;
    const fs::path path = model_path(dataset_root, id);
    if (!fs::exists(path))
      fail(ErrorCode::kMeshNotFound, "no mesh for obj_id " + std::to_string(id) + " at " + path.string());
    meshes.emplace(id, read_ply_mesh(path));
  }
  return meshes;
}

std::vector<InstanceMask> read_view_masks(const fs::path &scene_dir, int view_id, std::size_t count,
                                          bool visible) {
  std::vector<InstanceMask> masks;
  masks.reserve(count);
  const fs::path dir = scene_dir / (visible ? "mask_visib" : "mask");
  for (std::size_t i = 0; i < count; ++i) {
    InstanceMask m = InstanceMask::from_image(
        read_gray(dir / mask_file_name(view_id, static_cast<int>(i))));
    m.instance_id = static_cast<int>(i);
    masks.push_back(std::move(m));
  }
  return masks;
}

ordered_json export_coco(const SceneBundle &bundle,
                         const std::map<int, std::vector<InstanceMask>> &visible_masks) {
  ordered_json images = ordered_json::array();
  for (const auto &v : bundle.views) {
    ordered_json img;
    img["id"] = v.view_id;
    const auto it = bundle.images.find(v.view_id);
    img["file_name"] = it != bundle.images.end() && !it->second.rgb.empty()
                           ? "rgb/" + it->second.rgb.filename().string()
                           : "rgb/" + view_file_stem(v.view_id) + ".png";
    img["width"] = v.cam_K.width;
    img["height"] = v.cam_K.height;
    img["scene_id"] = bundle.scene_id;
    images.push_back(std::move(img));
  }

  ordered_json annotations = ordered_json::array();
  int next_id = 1;
  for (const auto &[view_id, masks] : visible_masks) {
    const ViewRecord *view = bundle.find_view(view_id);
    if (!view)
      fail(ErrorCode::kInvalidArgument, "masks given for unknown view " + std::to_string(view_id));
    const auto gt_it = bundle.gt.find(view_id);
    for (std::size_t i = 0; i < masks.size(); ++i) {
      const InstanceMask &mask = masks[i];
      if (mask.width() != view->cam_K.width || mask.height() != view->cam_K.height)
        fail(ErrorCode::kDimensionMismatch,
             "mask " + std::to_string(i) + " of view " + std::to_string(view_id) +
                 " differs from the image size");
      const long long area = mask.area();
      if (area == 0) continue;
      const int gt_index = mask.instance_id.value_or(static_cast<int>(i));
      const RunLength rle = rle_encode(mask);
      const BoundingBox box = mask.bbox();
      ordered_json ann;
      ann["id"] = next_id++;
      ann["image_id"] = view_id;
      ann["category_id"] = 1;
      ann["segmentation"] = {{"size", {rle.height, rle.width}},
                             {"counts", rle_counts_to_string(rle.counts)}};
      ann["area"] = area;
      ann["bbox"] = bbox_json(box);
      ann["iscrowd"] = 0;
      if (gt_it != bundle.gt.end() && gt_index >= 0 &&
          static_cast<std::size_t>(gt_index) < gt_it->second.size())
        ann["obj_id"] = gt_it->second[static_cast<std::size_t>(gt_index)].obj_id;
      ann["gt_index"] = gt_index;
      annotations.push_back(std::move(ann));
    }
  }

  ordered_json doc;
  doc["images"] = std::move(images);
  doc["annotations"] = std::move(annotations);
  doc["categories"] = ordered_json::array(
      {ordered_json{{"id", 1}, {"name", "object"}, {"supercategory", "object"}}});
  return doc;
}

PointCloud export_labeled_cloud(const ViewRecord &view, const DepthImage &depth,
                                const RgbImage &rgb, const std::vector<InstanceMask> &masks) {
  const int w = view.cam_K.width, h = view.cam_K.height;
  std::vector<int> labels_by_pixel(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].width() != w || masks[i].height() != h)
      fail(ErrorCode::kDimensionMismatch,
           "mask " + std::to_string(i) + " differs from the image size");
    for (std::size_t p = 0; p < labels_by_pixel.size(); ++p) {
      if (!masks[i].test_index(p)) continue;
      if (labels_by_pixel[p] != 0)
        fail(ErrorCode::kOverlappingMasks, "masks " + std::to_string(labels_by_pixel[p] - 1) +
                                               " and " + std::to_string(i) + " overlap");
      labels_by_pixel[p] = static_cast<int>(i) + 1;
    }
  }
  PointCloud cloud = deproject(depth, view.cam_K, view.depth_scale, nullptr, &rgb);
  cloud.labels.reserve(cloud.size());
  for (const auto &px : cloud.pixels)
    cloud.labels.push_back(
        labels_by_pixel[static_cast<std::size_t>(px.v) * static_cast<std::size_t>(w) +
                        static_cast<std::size_t>(px.u)]);
  return cloud;
}

}  // namespace dopose
