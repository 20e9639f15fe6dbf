#include "dopose/service.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <json.hpp>

#include "dopose/annotation.hpp"
#include "dopose/fileio.hpp"
#include "dopose/renderer.hpp"
#include "dopose/scene_ops.hpp"

// After Eigen: resolv.h, pulled in here, defines a `_res` macro.
#include <httplib.h>

namespace dopose {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

GrayImage depth_visualization(const DepthImage &depth) {
  GrayImage out(depth.width(), depth.height(), 255);
  std::uint16_t lo = std::numeric_limits<std::uint16_t>::max(), hi = 0;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (depth[i] == 0) continue;
    lo = std::min(lo, depth[i]);
    hi = std::max(hi, depth[i]);
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (depth[i] == 0) continue;
    if (hi == lo) {
      out[i] = 127;
      continue;
    }
    const double t = static_cast<double>(depth[i] - lo) / static_cast<double>(hi - lo);
    out[i] = static_cast<std::uint8_t>(std::lround(t * 254.0));
  }
  return out;
}

namespace {

// HTTP status carried through handlers.
struct HttpError {
  int status;
  std::string message;
};

[[noreturn]] void http_fail(int status, const std::string &message) { throw HttpError{status, message}; }

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidPose: return 422;
    case ErrorCode::kMeshNotFound: return 404;
    case ErrorCode::kSceneLocked: return 409;
    case ErrorCode::kMissingFile:
    case ErrorCode::kMissingWorldTransform: return 412;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response &res, const ordered_json &body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response &res, int status, const std::string &message) {
  send_json(res, ordered_json{{"error", message}}, status);
}

std::string content_type_for(const fs::path &path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".tif" || ext == ".tiff") return "image/tiff";
  return "application/octet-stream";
}

json parse_body(const httplib::Request &req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error &e) {
    http_fail(400, std::string("malformed JSON body: ") + e.what());
  }
}

std::vector<double> numbers(const json &body, const char *key, std::size_t n) {
  if (!body.contains(key) || !body[key].is_array() || body[key].size() != n)
    http_fail(400, std::string(key) + ": expected " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto &v : body[key]) {
    if (!v.is_number()) http_fail(400, std::string(key) + ": non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

struct AnnotationService::Impl {
  struct Job {
    std::string id, scene, kind;
    std::string state = "running";
    std::string error;
    ordered_json result;
  };

  ServiceOptions options;
  httplib::Server server;

  std::mutex jobs_mutex;
  std::map<std::string, Job> jobs;
  std::vector<std::thread> threads;
  std::size_t next_job = 1;

  std::mutex mesh_mutex;
  std::map<int, std::shared_ptr<const TriangleMesh>> meshes;

  explicit Impl(ServiceOptions opts) : options(std::move(opts)) { routes(); }

  fs::path scene_dir(const std::string &scene) const {
    fs::path dir;
    try {
      dir = scene_directory(options.dataset_root, options.split, scene);
    } catch (const Error &e) {
      http_fail(404, e.what());
    }
    if (!fs::is_directory(dir)) http_fail(404, "unknown scene " + scene);
    return dir;
  }

  SceneBundle scene(const std::string &name) const { return load_scene(scene_dir(name)); }

  std::shared_ptr<const TriangleMesh> mesh(int obj_id) {
    std::lock_guard lock(mesh_mutex);
    if (const auto it = meshes.find(obj_id); it != meshes.end()) return it->second;
    const fs::path path = model_path(options.dataset_root, obj_id);
    if (!fs::exists(path)) http_fail(404, "unknown object " + std::to_string(obj_id));
    auto m = std::make_shared<const TriangleMesh>(read_ply_mesh(path));
    meshes[obj_id] = m;
    return m;
  }

  ordered_json list_scenes() const {
    const fs::path root = options.dataset_root / options.split;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw Error(ErrorCode::kMissingFile, root.string() + " is not readable");
    std::vector<fs::path> dirs;
    for (const auto &entry : fs::directory_iterator(root)) {
      if (entry.is_directory() && fs::exists(entry.path() / scene_files::kCamera)) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    ordered_json out = ordered_json::array();
    for (const auto &dir : dirs) {
      ordered_json item;
      item["scene"] = dir.filename().string();
      try {
        const SceneBundle b = load_scene(dir);
        const bool has_annotation = fs::exists(dir / scene_files::kAnnotation);
        std::set<int> objects;
        for (const auto &[view, entries] : b.gt)
          for (const auto &e : entries) objects.insert(e.obj_id);
        if (objects.empty() && has_annotation)
          for (const auto &p : read_annotation(dir / scene_files::kAnnotation).poses) objects.insert(p.obj_id);
        item["scene_id"] = b.scene_id;
        item["views"] = b.views.size();
        item["objects"] = objects.size();
        item["status"] = b.has_gt ? "annotated" : has_annotation ? "reference" : "new";
        item["has_world"] = b.has_world;
        item["has_masks"] = b.has_gt_info;
      } catch (const Error &e) {
        item["status"] = "error";
        item["error"] = e.what();
      }
      out.push_back(std::move(item));
    }
    return out;
  }

  void get_view(const httplib::Request &req, httplib::Response &res) {
    const SceneBundle b = scene(req.matches[1]);
    const int view_id = std::stoi(req.matches[2]);
    if (!b.find_view(view_id)) http_fail(404, "unknown view " + std::string(req.matches[2]));
    const ViewImages &images = b.images.at(view_id);
    const std::string layer = req.has_param("layer") ? req.get_param_value("layer") : "rgb";
    if (layer == "rgb") {
      res.set_content(read_text_file(images.rgb), content_type_for(images.rgb));
    } else if (layer == "depth_vis") {
      const auto png = encode_png(depth_visualization(read_depth(images.depth)));
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    } else {
      http_fail(400, "unknown layer '" + layer + "'");
    }
  }

  void post_overlay(const httplib::Request &req, httplib::Response &res) {
    const SceneBundle b = scene(req.matches[1]);
    const int view_id = std::stoi(req.matches[2]);
    const ViewRecord *view = b.find_view(view_id);
    if (!view) http_fail(404, "unknown view " + std::string(req.matches[2]));
    const json body = parse_body(req);
    if (!body.is_object() || !body.contains("obj_id") || !body["obj_id"].is_number_integer())
      http_fail(400, "obj_id: expected an integer");
    const auto rotation = numbers(body, "rotation", 9);
    const auto translation = numbers(body, "translation", 3);
    Rgb tint{0, 255, 0};
    if (body.contains("tint")) {
      const auto t = numbers(body, "tint", 3);
      for (double c : t)
        if (c < 0 || c > 255) http_fail(400, "tint: channels must be in 0..255");
      tint = {static_cast<std::uint8_t>(t[0]), static_cast<std::uint8_t>(t[1]),
              static_cast<std::uint8_t>(t[2])};
    }
    double alpha = 0.5;
    if (body.contains("alpha")) {
      if (!body["alpha"].is_number()) http_fail(400, "alpha: expected a number");
      alpha = body["alpha"].get<double>();
      if (!(alpha >= 0.0 && alpha <= 1.0)) http_fail(400, "alpha: must be in [0, 1]");
    }
    const auto m = mesh(body["obj_id"].get<int>());
    const Pose pose = Pose::from_arrays(rotation, translation);
    const RgbImage rgb = read_rgb(b.images.at(view_id).rgb);
    const auto png = encode_png(render_overlay(rgb, *m, pose, view->cam_K, tint, alpha));
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  void get_annotation(const httplib::Request &req, httplib::Response &res) {
    const fs::path path = scene_dir(req.matches[1]) / scene_files::kAnnotation;
    if (!fs::exists(path)) http_fail(404, "no annotation saved");
    send_json(res, annotation_to_json(read_annotation(path)));
  }

  void put_annotation(const httplib::Request &req, httplib::Response &res) {
    const fs::path dir = scene_dir(req.matches[1]);
    const SceneBundle b = load_scene(dir);
    json body = parse_body(req);
    if (body.is_object()) body["scene_id"] = b.scene_id;
    ReferenceAnnotation ann;
    try {
      ann = annotation_from_json(body, "body");
    } catch (const Error &e) {
      http_fail(e.code() == ErrorCode::kInvalidPose ? 422 : 400, e.what());
    }
    if (!b.find_view(ann.ref_view_id))
      http_fail(422, "reference view " + std::to_string(ann.ref_view_id) + " is not part of the scene");
    const DirectoryLock lock(dir);
    write_annotation(dir / scene_files::kAnnotation, ann);
    send_json(res, annotation_to_json(ann));
  }

  void start_job(const std::string &scene_name, const std::string &kind, httplib::Response &res) {
    const fs::path dir = scene_dir(scene_name);
    const SceneBundle b = load_scene(dir);
    if (kind == "propagate") {
      if (!fs::exists(dir / scene_files::kAnnotation)) http_fail(412, "no reference annotation saved");
      if (!b.has_world) http_fail(412, (dir / scene_files::kWorld).string() + " not found");
    } else if (!b.has_gt) {
      http_fail(412, "scene has no scene_gt.json; run propagate first");
    }
    auto lock = std::make_shared<DirectoryLock>(dir);  // 409 when held

    std::string id;
    {
      std::lock_guard guard(jobs_mutex);
      id = "job-" + std::to_string(next_job++);
      jobs[id] = Job{id, scene_name, kind, "running", "", {}};
      threads.emplace_back([this, id, dir, kind, scene_name, lock]() mutable {
        ordered_json result;
        std::string error;
        try {
          if (options.job_hook) options.job_hook(scene_name, kind);
          if (kind == "propagate") {
            const auto s = propagate_scene(dir, dir / scene_files::kAnnotation);
            result = {{"objects", s.objects}, {"views", s.views}};
          } else {
            const auto s = render_scene_masks(dir, options.dataset_root, {}, options.exec);
            result = {{"views", s.views}, {"instances", s.instances}};
          }
        } catch (const std::exception &e) {
          error = e.what();
        }
        lock.reset();
        std::lock_guard guard(jobs_mutex);
        Job &job = jobs[id];
        job.state = error.empty() ? "succeeded" : "failed";
        job.error = error;
        job.result = std::move(result);
      });
    }
    send_json(res, ordered_json{{"job_id", id}, {"state", "running"}}, 202);
  }

  void get_job(const httplib::Request &req, httplib::Response &res) {
    std::lock_guard guard(jobs_mutex);
    const auto it = jobs.find(req.matches[1]);
    if (it == jobs.end()) http_fail(404, "unknown job " + std::string(req.matches[1]));
    const Job &job = it->second;
    ordered_json body{{"job_id", job.id}, {"scene", job.scene}, {"kind", job.kind}, {"state", job.state}};
    if (!job.error.empty()) body["error"] = job.error;
    if (!job.result.is_null()) body["result"] = job.result;
    send_json(res, body);
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [this, f](const httplib::Request &req, httplib::Response &res) {
      try {
        (this->*f)(req, res);
      } catch (const HttpError &e) {
        send_error(res, e.status, e.message);
      } catch (const Error &e) {
        send_error(res, status_for(e.code()), e.what());
      } catch (const std::exception &e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    server.Get("/api/scenes", [this](const httplib::Request &, httplib::Response &res) {
      try {
        send_json(res, list_scenes());
      } catch (const std::exception &e) {
        send_error(res, 500, e.what());
      }
    });
    server.Get(R"(/api/scenes/([^/]+)/views/(\d+))", guarded(&Impl::get_view));
    server.Post(R"(/api/scenes/([^/]+)/views/(\d+)/overlay)", guarded(&Impl::post_overlay));
    server.Get(R"(/api/scenes/([^/]+)/annotation)", guarded(&Impl::get_annotation));
    server.Put(R"(/api/scenes/([^/]+)/annotation)", guarded(&Impl::put_annotation));
    server.Post(R"(/api/scenes/([^/]+)/propagate)", guarded(&Impl::post_propagate));
    server.Post(R"(/api/scenes/([^/]+)/masks)", guarded(&Impl::post_masks));
    server.Get(R"(/api/jobs/([^/]+))", guarded(&Impl::get_job));
  }

  void post_propagate(const httplib::Request &req, httplib::Response &res) {
    start_job(req.matches[1], "propagate", res);
  }
  void post_masks(const httplib::Request &req, httplib::Response &res) {
    start_job(req.matches[1], "masks", res);
  }

  void join_all() {
    std::vector<std::thread> running;
    {
      std::lock_guard guard(jobs_mutex);
      running.swap(threads);
    }
    for (auto &t : running) t.join();
  }
};

AnnotationService::AnnotationService(ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

AnnotationService::~AnnotationService() {
  stop();
  wait_for_jobs();
}

int AnnotationService::bind(const std::string &host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::kIoFailure, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    fail(ErrorCode::kIoFailure, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationService::run() { impl_->server.listen_after_bind(); }

void AnnotationService::stop() { impl_->server.stop(); }

void AnnotationService::wait_for_jobs() { impl_->join_all(); }

}  // namespace dopose
