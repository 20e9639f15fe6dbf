#include "fixtures.hpp"

#include <cstdlib>
#include <unistd.h>

#include <Eigen/Geometry>

#include "dopose/fileio.hpp"

namespace dopose::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "dopose_test_XXXXXX").string();
  if (!mkdtemp(pattern.data())) fail(ErrorCode::kIoFailure, "mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

CameraIntrinsics test_camera(int width, int height) {
  CameraIntrinsics k;
  k.fx = k.fy = 200.0 * width / 128.0;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.width = width;
  k.height = height;
  return k;
}

Pose look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = Eigen::Vector3d::UnitY().cross(z);
  if (x.norm() < 1e-9) x = Eigen::Vector3d::UnitZ().cross(z);
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d cam_to_world;
  cam_to_world << x, y, z;
  // Re-orthonormalize so the product passes the strict rotation check.
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cam_to_world, Eigen::ComputeFullU | Eigen::ComputeFullV);
  cam_to_world = svd.matrixU() * svd.matrixV().transpose();
  const Eigen::Matrix3d r = cam_to_world.transpose();
  return Pose(r, -r * eye);
}

std::vector<SceneObject> default_objects() {
  std::vector<SceneObject> objects;
  objects.push_back({1, TriangleMesh::box({100, 100, 100}), Pose::identity()});
  objects.push_back({2, TriangleMesh::box({60, 40, 80}),
                     Pose(rotation_y(0.4) * rotation_x(0.2), {110, 10, 20})});
  return objects;
}

SceneFixture build_scene(const fs::path &root, const FixtureOptions &options) {
  SceneFixture fx;
  fx.root = root;
  char name[16];
  std::snprintf(name, sizeof name, "%06d", options.scene_id);
  fx.scene_dir = root / options.split / name;
  fx.objects = options.objects;
  if (options.identity_world)
    for (auto &o : fx.objects)
      o.world_from_model = compose(Pose::from_translation({0, 0, options.radius}), o.world_from_model);

  for (const auto &o : fx.objects) {
    const fs::path path = model_path(root, o.obj_id);
    if (!fs::exists(path)) write_ply_mesh(path, o.mesh);
  }

  const CameraIntrinsics k = test_camera(options.width, options.height);
  SceneBundle bundle;
  bundle.scene_id = options.scene_id;
  for (int i = 0; i < options.views; ++i) {
    ViewRecord view;
    view.view_id = i;
    view.cam_K = k;
    view.depth_scale = 1.0;
    if (options.identity_world) {
      view.world_to_cam = Pose::identity();
    } else {
      const double a = 2.0 * M_PI * i / options.views;
      const Eigen::Vector3d eye(options.radius * std::sin(a), -0.35 * options.radius,
                                -options.radius * std::cos(a));
      view.world_to_cam = look_at(eye, Eigen::Vector3d::Zero());
    }
    fx.views.push_back(view);

    // Render the view: nearest object per pixel decides color and depth.
    DepthBuffer nearest(k.width, k.height);
    Image<int> owner(k.width, k.height, -1);
    for (std::size_t o = 0; o < fx.objects.size(); ++o) {
      const Pose pose = compose(*view.world_to_cam, fx.objects[o].world_from_model);
      const DepthBuffer buf = rasterize(fx.objects[o].mesh, pose, k, Execution::kSerial);
      for (std::size_t p = 0; p < buf.width() * static_cast<std::size_t>(buf.height()); ++p)
        if (buf[p] < nearest[p]) {
          nearest[p] = buf[p];
          owner[p] = static_cast<int>(o);
        }
    }
    RgbImage rgb(k.width, k.height, Rgb{40, 40, 40});
    for (std::size_t p = 0; p < rgb.size(); ++p)
      if (owner[p] >= 0)
        rgb[p] = Rgb{static_cast<std::uint8_t>(200 - 60 * owner[p]), static_cast<std::uint8_t>(80 + 70 * owner[p]), 90};
    const std::string stem = view_file_stem(i);
    write_rgb(fx.scene_dir / "rgb" / (stem + ".png"), rgb);
    write_depth(fx.scene_dir / "depth" / (stem + ".png"), nearest.to_depth_image(view.depth_scale));
    bundle.images[i] = {fx.scene_dir / "rgb" / (stem + ".png"), fx.scene_dir / "depth" / (stem + ".png")};
  }
  bundle.views = fx.views;
  if (!options.write_world)
    for (auto &v : bundle.views) v.world_to_cam.reset();
  save_scene(bundle, fx.scene_dir);

  fx.annotation.scene_id = options.scene_id;
  fx.annotation.ref_view_id = options.ref_view;
  const Pose &ref = *fx.views.at(static_cast<std::size_t>(options.ref_view)).world_to_cam;
  for (const auto &o : fx.objects) fx.annotation.poses.push_back({o.obj_id, compose(ref, o.world_from_model)});
  if (options.write_annotation) write_annotation(fx.scene_dir / scene_files::kAnnotation, fx.annotation);
  return fx;
}

Eigen::Matrix3d random_rotation(std::mt19937_64 &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Pose random_pose(std::mt19937_64 &rng, double translation_range) {
  std::uniform_real_distribution<double> t(-translation_range, translation_range);
  return Pose(random_rotation(rng), {t(rng), t(rng), t(rng)});
}

TriangleMesh random_mesh(std::mt19937_64 &rng, int triangles) {
  std::uniform_real_distribution<double> xy(-180.0, 180.0);
  std::uniform_real_distribution<double> z(-150.0, 900.0);
  std::uniform_real_distribution<double> jitter(-60.0, 60.0);
  TriangleMesh mesh;
  for (int t = 0; t < triangles; ++t) {
    const Eigen::Vector3d c(xy(rng), xy(rng), z(rng));
    for (int i = 0; i < 3; ++i) mesh.vertices.push_back(c + Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng)));
    mesh.triangles.push_back({3 * t, 3 * t + 1, 3 * t + 2});
  }
  return mesh;
}

std::optional<ErrorCode> error_code_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  return std::nullopt;
}

std::string error_message_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.what();
  }
  return {};
}

}  // namespace dopose::testing
