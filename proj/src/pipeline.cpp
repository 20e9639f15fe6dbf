#include "dopose/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <set>

#include "dopose/annotation.hpp"
#include "dopose/fileio.hpp"
#include "dopose/scene_ops.hpp"
#include "dopose/service.hpp"

namespace dopose {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string> &setting_keys() {
  static const std::vector<std::string> keys = {
      "dataset", "split", "scene", "out", "seed", "iou-thresholds", "confidence-floor",
      "max-dets", "ransac-iters", "ransac-threshold-mm", "min-inliers", "resolution",
      "annotation", "format", "gt", "results", "rgb", "depth", "masks", "camera", "host",
      "port", "serial"};
  return keys;
}

std::string env_var_name(const std::string &key) {
  std::string name = "DOPOSE_";
  for (char c : key) name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

EnvLookup process_environment() {
  return [](const std::string &name) -> std::optional<std::string> {
    if (const char *v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

std::optional<std::string> resolve_setting(const SettingSources &sources, const std::string &key) {
  if (const auto it = sources.flags.find(key); it != sources.flags.end()) return it->second;
  if (sources.env)
    if (auto v = sources.env(env_var_name(key))) return v;
  if (sources.config.is_object()) {
    std::string underscored = key;
    std::replace(underscored.begin(), underscored.end(), '-', '_');
    for (const auto &name : {key, underscored}) {
      if (!sources.config.contains(name)) continue;
      const json &v = sources.config[name];
      if (v.is_string()) return v.get<std::string>();
      if (v.is_array()) {
        // Threshold lists may be written as arrays in the config file.
        std::string joined;
        for (const auto &item : v) joined += (joined.empty() ? "" : ",") + item.dump();
        return joined;
      }
      return v.dump();
    }
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void bad_setting(const std::string &key, const std::string &value, const std::string &what) {
  fail(ErrorCode::kInvalidArgument, "--" + key + " '" + value + "': " + what);
}

double parse_double(const std::string &key, const std::string &text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    bad_setting(key, text, "expected a number");
  return v;
}

long long parse_integer(const std::string &key, const std::string &text, long long lo) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) bad_setting(key, text, "expected an integer");
  if (v < lo) bad_setting(key, text, "must be at least " + std::to_string(lo));
  return v;
}

bool parse_bool(const std::string &key, const std::string &text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off" || text.empty()) return false;
  bad_setting(key, text, "expected a boolean");
}

std::vector<std::string> split(const std::string &text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

std::vector<double> parse_thresholds(const std::string &text) {
  const std::string key = "iou-thresholds";
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) bad_setting(key, text, "expected start:step:stop");
    const double start = parse_double(key, parts[0]);
    const double step = parse_double(key, parts[1]);
    const double stop = parse_double(key, parts[2]);
    if (!(step > 0.0) || stop < start) bad_setting(key, text, "empty range");
    const auto n = static_cast<int>(std::lround((stop - start) / step)) + 1;
    if (n == 10 && start == 0.5 && stop == 0.95) return default_iou_thresholds();
    for (int i = 0; i < n; ++i) out.push_back(i == n - 1 ? stop : start + i * step);
  } else {
    for (const auto &p : split(text, ',')) out.push_back(parse_double(key, p));
  }
  if (out.empty()) bad_setting(key, text, "no thresholds");
  for (double t : out)
    if (!(t > 0.0 && t <= 1.0)) bad_setting(key, text, "thresholds must lie in (0, 1]");
  return out;
}

PipelineConfig make_config(const SettingSources &sources) {
  PipelineConfig c;
  const auto get = [&](const char *key) { return resolve_setting(sources, key); };
  if (auto v = get("dataset")) c.dataset = *v;
  if (auto v = get("split")) c.split = *v;
  if (auto v = get("scene")) c.scene = *v;
  if (auto v = get("out")) c.out = *v;
  if (auto v = get("seed")) c.seed = static_cast<std::uint64_t>(parse_integer("seed", *v, 0));
  c.ransac.seed = c.seed;
  if (auto v = get("iou-thresholds")) c.metrics.iou_thresholds = parse_thresholds(*v);
  if (auto v = get("confidence-floor")) c.metrics.confidence_floor = parse_double("confidence-floor", *v);
  if (auto v = get("max-dets")) c.metrics.max_detections = static_cast<std::size_t>(parse_integer("max-dets", *v, 1));
  if (auto v = get("ransac-iters")) c.ransac.iterations = static_cast<int>(parse_integer("ransac-iters", *v, 1));
  if (auto v = get("ransac-threshold-mm")) {
    c.ransac.inlier_threshold = parse_double("ransac-threshold-mm", *v);
    if (!(c.ransac.inlier_threshold > 0.0)) bad_setting("ransac-threshold-mm", *v, "must be positive");
  }
  if (auto v = get("min-inliers")) c.ransac.min_inliers = static_cast<std::size_t>(parse_integer("min-inliers", *v, 0));
  if (auto v = get("resolution")) {
    const auto parts = split(*v, 'x');
    if (parts.size() != 2) bad_setting("resolution", *v, "expected WIDTHxHEIGHT");
    c.resolution = std::pair<int, int>{static_cast<int>(parse_integer("resolution", parts[0], 1)),
                                       static_cast<int>(parse_integer("resolution", parts[1], 1))};
  }
  if (auto v = get("annotation")) c.annotation = *v;
  if (auto v = get("format")) c.format = *v;
  if (auto v = get("gt")) c.gt = *v;
  if (auto v = get("results")) c.results = *v;
  if (auto v = get("rgb")) c.rgb = *v;
  if (auto v = get("depth")) c.depth = *v;
  if (auto v = get("masks")) c.masks = *v;
  if (auto v = get("camera")) c.camera = *v;
  if (auto v = get("host")) c.host = *v;
  if (auto v = get("port")) c.port = static_cast<int>(parse_integer("port", *v, 0));
  if (auto v = get("serial")) c.serial = parse_bool("serial", *v);
  return c;
}

namespace {

struct Context {
  PipelineConfig config;
  std::ostream &out;
  std::ostream &err;

  Execution exec() const { return config.serial ? Execution::kSerial : Execution::kParallel; }

  void log(const std::string &msg) const { err << "[dopose] " << msg << "\n"; }

  fs::path scene_dir() const {
    if (config.scene.empty()) fail(ErrorCode::kInvalidArgument, "--scene is required");
    if (config.dataset.empty()) {
      if (!fs::is_directory(config.scene))
        fail(ErrorCode::kMissingFile, "scene directory " + config.scene + " not found");
      return config.scene;
    }
    const fs::path dir = scene_directory(config.dataset, config.split, config.scene);
    if (!fs::is_directory(dir)) fail(ErrorCode::kMissingFile, "scene directory " + dir.string() + " not found");
    return dir;
  }

  fs::path dataset_root(const fs::path &scene) const {
    return config.dataset.empty() ? dataset_root_of(scene) : config.dataset;
  }

  fs::path output_dir(const fs::path &fallback) const { return config.out.empty() ? fallback : config.out; }
};

json read_json_file(const fs::path &path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    fail(ErrorCode::kMalformedFile, path.string() + ": " + e.what());
  }
}

void require_file(const fs::path &path, const char *flag) {
  if (path.empty()) fail(ErrorCode::kInvalidArgument, std::string("--") + flag + " is required");
  if (!fs::exists(path)) fail(ErrorCode::kMissingFile, path.string() + " not found");
}

int cmd_propagate(const Context &ctx) {
  const fs::path dir = ctx.scene_dir();
  const fs::path annotation = ctx.config.annotation.empty() ? dir / scene_files::kAnnotation : ctx.config.annotation;
  const DirectoryLock lock(dir);
  const PropagationSummary s = propagate_scene(dir, annotation);
  ctx.log("propagated " + std::to_string(s.objects) + " objects to " + std::to_string(s.views) + " views");
  ctx.out << ordered_json{{"scene", dir.string()}, {"objects", s.objects}, {"views", s.views}}.dump() << "\n";
  return kExitOk;
}

int cmd_render_masks(const Context &ctx) {
  const fs::path dir = ctx.scene_dir();
  GroundTruthOptions options;
  options.resolution = ctx.config.resolution;
  const DirectoryLock lock(dir);
  const MaskSummary s = render_scene_masks(dir, ctx.dataset_root(dir), options, ctx.exec());
  ctx.log("rendered " + std::to_string(s.instances) + " instances in " + std::to_string(s.views) + " views");
  ctx.out << ordered_json{{"scene", dir.string()}, {"views", s.views}, {"instances", s.instances}}.dump() << "\n";
  return kExitOk;
}

std::map<int, std::vector<InstanceMask>> visible_masks(const fs::path &dir, const SceneBundle &bundle) {
  std::map<int, std::vector<InstanceMask>> masks;
  for (const auto &[view, entries] : bundle.gt) masks[view] = read_view_masks(dir, view, entries.size(), true);
  return masks;
}

int cmd_export(const Context &ctx) {
  const std::string &format = ctx.config.format;
  if (format != "coco" && format != "cloud")
    fail(ErrorCode::kInvalidArgument, "export format must be coco or cloud, got '" + format + "'");
  const fs::path dir = ctx.scene_dir();
  const SceneBundle bundle = load_scene(dir);
  if (!bundle.has_gt) fail(ErrorCode::kMissingFile, (dir / scene_files::kGt).string() + " not found");
  const auto masks = visible_masks(dir, bundle);
  const fs::path out_dir = ctx.output_dir(dir);

  if (format == "coco") {
    const ordered_json doc = export_coco(bundle, masks);
    const fs::path path = out_dir / "scene_gt_coco.json";
    write_file_atomic(path, dump_json(doc));
    ctx.log("wrote " + std::to_string(doc["annotations"].size()) + " annotations to " + path.string());
    ctx.out << ordered_json{{"path", path.string()}, {"images", doc["images"].size()},
                            {"annotations", doc["annotations"].size()}}
                   .dump()
            << "\n";
    return kExitOk;
  }

  std::size_t points = 0;
  for (const auto &view : bundle.views) {
    const auto &images = bundle.images.at(view.view_id);
    const auto it = masks.find(view.view_id);
    const PointCloud cloud = export_labeled_cloud(view, read_depth(images.depth), read_rgb(images.rgb),
                                                  it == masks.end() ? std::vector<InstanceMask>{} : it->second);
    write_ply_cloud(out_dir / "cloud" / (view_file_stem(view.view_id) + ".ply"), cloud);
    points += cloud.size();
  }
  ctx.log("wrote " + std::to_string(bundle.views.size()) + " labeled clouds");
  ctx.out << ordered_json{{"path", (out_dir / "cloud").string()}, {"views", bundle.views.size()},
                          {"points", points}}
                 .dump()
          << "\n";
  return kExitOk;
}

int cmd_evaluate(const Context &ctx) {
  require_file(ctx.config.gt, "gt");
  require_file(ctx.config.results, "results");
  const CocoGroundTruth gt = parse_coco_ground_truth(read_json_file(ctx.config.gt));
  const std::vector<Prediction> preds = parse_coco_results(read_json_file(ctx.config.results));
  const EvalReport report = evaluate(gt, preds, ctx.config.metrics, ctx.exec());
  if (!ctx.config.out.empty()) {
    const fs::path path = ctx.config.out / "eval_report.json";
    write_file_atomic(path, dump_json(report.to_json()));
    ctx.log("wrote " + path.string());
  }
  if (ctx.config.format == "json")
    ctx.out << report.to_json().dump(2) << "\n";
  else
    ctx.out << report.to_table();
  return kExitOk;
}

CameraIntrinsics read_camera(const fs::path &path, int width, int height, double &depth_scale) {
  json doc = read_json_file(path);
  if (doc.is_object() && !doc.contains("cam_K") && doc.size() == 1) doc = doc.begin().value();
  if (!doc.is_object() || !doc.contains("cam_K") || !doc["cam_K"].is_array() || doc["cam_K"].size() != 9)
    fail(ErrorCode::kMalformedFile, path.string() + ": expected one camera entry with cam_K (9 numbers)");
  std::vector<double> k;
  for (const auto &v : doc["cam_K"]) {
    if (!v.is_number()) fail(ErrorCode::kMalformedFile, path.string() + "/cam_K: non-numeric entry");
    k.push_back(v.get<double>());
  }
  depth_scale = 1.0;
  if (doc.contains("depth_scale")) {
    if (!doc["depth_scale"].is_number() || !(doc["depth_scale"].get<double>() > 0.0))
      fail(ErrorCode::kMalformedFile, path.string() + "/depth_scale: expected a positive number");
    depth_scale = doc["depth_scale"].get<double>();
  }
  return CameraIntrinsics::from_matrix(k, width, height);
}

std::vector<InstanceMask> read_masks(const fs::path &path) {
  std::vector<InstanceMask> masks;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(path))
      if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto &f : files) masks.push_back(InstanceMask::from_image(read_gray(f)));
    return masks;
  }
  for (auto &p : parse_coco_results(read_json_file(path))) masks.push_back(std::move(p.mask));
  return masks;
}

int cmd_grasp(const Context &ctx) {
  require_file(ctx.config.rgb, "rgb");
  require_file(ctx.config.depth, "depth");
  require_file(ctx.config.masks, "masks");
  require_file(ctx.config.camera, "camera");
  const RgbImage rgb = read_rgb(ctx.config.rgb);
  const DepthImage depth = read_depth(ctx.config.depth);
  double depth_scale = 1.0;
  const CameraIntrinsics k = read_camera(ctx.config.camera, depth.width(), depth.height(), depth_scale);
  const std::vector<InstanceMask> masks = read_masks(ctx.config.masks);

  GraspOptions options;
  options.exec = ctx.exec();
  ordered_json grasps = ordered_json::array();
  ordered_json failures = ordered_json::array();
  for (std::size_t idx : rank_masks_by_confidence(masks)) {
    try {
      const GraspPose g = compute_suction_grasp(rgb, depth, k, depth_scale, masks[idx], ctx.config.ransac, options);
      ordered_json item;
      item["mask_index"] = idx;
      const ordered_json fields = grasp_to_json(g);
      for (const auto &[key, value] : fields.items()) item[key] = value;
      grasps.push_back(std::move(item));
    } catch (const Error &e) {
      ctx.err << "[dopose] warning: mask " << idx << ": " << to_string(e.code()) << ": " << e.what() << "\n";
      failures.push_back({{"mask_index", idx}, {"error", to_string(e.code())}, {"message", e.what()}});
    }
  }
  const ordered_json doc{{"grasps", grasps}, {"failures", failures}};
  if (!ctx.config.out.empty()) write_file_atomic(ctx.config.out / "grasps.json", dump_json(doc));
  ctx.out << doc.dump(2) << "\n";
  return kExitOk;
}

int cmd_serve(const Context &ctx) {
  if (ctx.config.dataset.empty()) fail(ErrorCode::kInvalidArgument, "--dataset is required");
  if (!fs::is_directory(ctx.config.dataset))
    fail(ErrorCode::kMissingFile, "dataset " + ctx.config.dataset.string() + " not found");
  ServiceOptions options;
  options.dataset_root = ctx.config.dataset;
  options.split = ctx.config.split;
  options.exec = ctx.exec();
  AnnotationService service(options);
  const int port = service.bind(ctx.config.host, ctx.config.port);
  ctx.log("serving " + (ctx.config.dataset / ctx.config.split).string() + " on http://" + ctx.config.host + ":" +
          std::to_string(port));
  service.run();
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile:
    case ErrorCode::kMissingImage:
    case ErrorCode::kMissingWorldTransform:
    case ErrorCode::kSceneLocked: return kExitPrecondition;
    default: return kExitError;
  }
}

}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err, EnvLookup env) {
  CLI::App app{"Multi-view pose annotation, mask generation, evaluation and suction grasps", "dopose"};
  app.require_subcommand(1);

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option *> options;
  const auto add = [&](const std::string &key, const std::string &help) {
    options[key] = app.add_option("--" + key, values[key], help);
  };
  add("dataset", "dataset root (contains <split>/ and models/)");
  add("split", "split directory under the dataset root (default test)");
  add("scene", "scene id or scene directory");
  add("out", "output directory");
  add("seed", "random seed (default 0)");
  add("iou-thresholds", "IoU thresholds, list a,b,c or range start:step:stop");
  add("confidence-floor", "drop predictions scoring below this");
  add("max-dets", "detections kept per image (default 100)");
  add("ransac-iters", "RANSAC iterations (default 500)");
  add("ransac-threshold-mm", "RANSAC inlier threshold in mm (default 3)");
  add("min-inliers", "minimum plane inliers (default 50)");
  add("resolution", "render resolution override, WIDTHxHEIGHT");
  add("annotation", "reference annotation file (default <scene>/scene_annotation.json)");
  add("format", "export: coco|cloud; evaluate: table|json");
  add("gt", "ground-truth COCO document");
  add("results", "COCO results document");
  add("rgb", "color image");
  add("depth", "16-bit depth image");
  add("masks", "COCO results document or directory of mask PNGs");
  add("camera", "camera JSON with cam_K and depth_scale");
  add("host", "service bind address (default 127.0.0.1)");
  add("port", "service port (default 8080, 0 picks a free port)");
  add("serial", "run kernels on one thread (true|false)");
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (keys are the flag names)");

  auto *propagate = app.add_subcommand("propagate", "carry the reference annotation into every view");
  auto *render = app.add_subcommand("render-masks", "render amodal/visible masks and scene_gt_info.json");
  auto *exporter = app.add_subcommand("export", "export coco | cloud");
  std::string export_format;
  exporter->add_option("format", export_format, "coco or cloud");
  auto *evaluate_cmd = app.add_subcommand("evaluate", "COCO AP/AR and Overlap P/R/F");
  auto *grasp = app.add_subcommand("grasp", "suction grasps for each mask");
  auto *serve = app.add_subcommand("serve", "run the annotation service");
  for (auto *sub : {propagate, render, exporter, evaluate_cmd, grasp, serve}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    SettingSources sources;
    sources.env = env;
    for (const auto &[key, opt] : options)
      if (opt->count() > 0) sources.flags[key] = values[key];
    if (!export_format.empty()) sources.flags["format"] = export_format;
    if (config_path.empty() && env)
      if (auto v = env("DOPOSE_CONFIG")) config_path = *v;
    if (!config_path.empty()) {
      sources.config = read_json_file(config_path);
      if (!sources.config.is_object()) fail(ErrorCode::kMalformedFile, config_path + ": expected an object");
    }
    const Context ctx{make_config(sources), out, err};

    if (*propagate) return cmd_propagate(ctx);
    if (*render) return cmd_render_masks(ctx);
    if (*exporter) return cmd_export(ctx);
    if (*evaluate_cmd) return cmd_evaluate(ctx);
    if (*grasp) return cmd_grasp(ctx);
    if (*serve) return cmd_serve(ctx);
    return kExitError;
  } catch (const Error &e) {
    err << "dopose: error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception &e) {
    err << "dopose: error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace dopose
