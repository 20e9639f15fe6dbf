#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dopose/annotation.hpp"
#include "dopose/bop.hpp"
#include "dopose/renderer.hpp"

namespace dopose::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// f = 200 px, principal point at the image center.
CameraIntrinsics test_camera(int width = 128, int height = 128);

// camera ← world transform of a camera at `eye` looking at `target`, image
// y axis roughly along world +y.
Pose look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target);

struct SceneObject {
  int obj_id = 1;
  TriangleMesh mesh;
  Pose world_from_model;
};

// Two boxes near the world origin: a 100 mm cube and a smaller rotated box.
std::vector<SceneObject> default_objects();

struct FixtureOptions {
  int scene_id = 1;
  std::string split = "test";
  int views = 16;
  int width = 128;
  int height = 128;
  double radius = 700.0;             // camera ring around the world origin
  bool identity_world = false;       // every view gets the identity transform
  bool write_world = true;           // scene_world.json
  bool write_annotation = true;      // scene_annotation.json for the first view
  int ref_view = 0;
  std::vector<SceneObject> objects = default_objects();
};

struct SceneFixture {
  std::filesystem::path root;
  std::filesystem::path scene_dir;
  std::vector<ViewRecord> views;  // world transforms always filled
  std::vector<SceneObject> objects;
  ReferenceAnnotation annotation;
};

// Writes models/, <split>/<scene>/ with rgb/, depth/ rendered from the
// objects, scene_camera.json, and optionally scene_world.json and the
// reference annotation. With identity_world the objects are moved in front of
// the shared camera.
SceneFixture build_scene(const std::filesystem::path &root, const FixtureOptions &options = {});

// Code and message of the dopose::Error thrown by `f`, nullopt if none.
std::optional<ErrorCode> error_code_of(const std::function<void()> &f);
std::string error_message_of(const std::function<void()> &f);

// Random triangle soup in front of a 128×128 test camera.
TriangleMesh random_mesh(std::mt19937_64 &rng, int triangles);

// Random rotation (uniform quaternion).
Eigen::Matrix3d random_rotation(std::mt19937_64 &rng);
Pose random_pose(std::mt19937_64 &rng, double translation_range);

}  // namespace dopose::testing
