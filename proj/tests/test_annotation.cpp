#include <doctest.h>

#include <cmath>
#include <random>

#include "dopose/annotation.hpp"
#include "support/fixtures.hpp"
#include "support/raycast.hpp"

using namespace dopose;
using namespace dopose::testing;

namespace {

ViewRecord view_with(int id, const Pose &world_to_cam) {
  ViewRecord v;
  v.view_id = id;
  v.cam_K = test_camera();
  v.world_to_cam = world_to_cam;
  return v;
}

std::vector<ViewRecord> random_views(std::mt19937_64 &rng, int n) {
  std::vector<ViewRecord> views;
  for (int i = 0; i < n; ++i) views.push_back(view_with(i, random_pose(rng, 1000.0)));
  return views;
}

ReferenceAnnotation random_annotation(std::mt19937_64 &rng, int ref_view, int objects) {
  ReferenceAnnotation ann;
  ann.scene_id = 1;
  ann.ref_view_id = ref_view;
  for (int i = 0; i < objects; ++i) ann.poses.push_back({i + 1, random_pose(rng, 500.0)});
  return ann;
}

ReferenceAnnotation as_reference(const std::map<int, std::vector<GtEntry>> &gt, int view_id) {
  ReferenceAnnotation ann;
  ann.scene_id = 1;
  ann.ref_view_id = view_id;
  for (const auto &e : gt.at(view_id)) ann.poses.push_back({e.obj_id, e.cam_from_model});
  return ann;
}

SceneBundle single_view_scene(std::vector<GtEntry> gt) {
  SceneBundle s;
  s.views.push_back(view_with(0, Pose::identity()));
  s.gt[0] = std::move(gt);
  s.has_gt = true;
  return s;
}

}  // namespace

TEST_CASE("identical world transforms leave poses unchanged") {
  std::mt19937_64 rng(1);
  const Pose shared = random_pose(rng, 800.0);
  std::vector<ViewRecord> views;
  for (int i = 0; i < 5; ++i) views.push_back(view_with(i, shared));
  const ReferenceAnnotation ann = random_annotation(rng, 2, 3);
  const auto gt = propagate_poses(ann, views);
  REQUIRE(gt.size() == 5);
  for (const auto &[id, entries] : gt)
    for (std::size_t i = 0; i < entries.size(); ++i) {
      CHECK(entries[i].obj_id == ann.poses[i].obj_id);
      CHECK(entries[i].cam_from_model.max_abs_difference(ann.poses[i].cam_from_model) < 1e-9);
    }
}

TEST_CASE("quarter turn about the world Z axis") {
  const std::vector<ViewRecord> views = {
      view_with(0, Pose::from_translation({0, 0, 800})),
      view_with(1, Pose(rotation_z(M_PI / 2), {0, 0, 800})),
  };
  // object at world (100, 0, 0), unrotated
  ReferenceAnnotation ann;
  ann.poses = {{4, Pose::from_translation({100, 0, 800})}};
  const auto gt = propagate_poses(ann, views);
  const Pose &p = gt.at(1).front().cam_from_model;
  Eigen::Matrix3d expected_r;
  expected_r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((p.rotation() - expected_r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((p.translation() - Eigen::Vector3d(0, 100, 800)).norm() < 1e-9);
}

TEST_CASE("propagating back restores the reference") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto views = random_views(rng, 16);
    const ReferenceAnnotation ann = random_annotation(rng, trial % 16, 2);
    const auto forward = propagate_poses(ann, views);
    const int target = (trial * 7 + 3) % 16;
    const auto back = propagate_poses(as_reference(forward, target), views);
    for (std::size_t i = 0; i < ann.poses.size(); ++i) {
      CHECK(forward.at(ann.ref_view_id)[i].cam_from_model.max_abs_difference(
                ann.poses[i].cam_from_model) < 1e-9);
      CHECK(back.at(ann.ref_view_id)[i].cam_from_model.max_abs_difference(
                ann.poses[i].cam_from_model) < 1e-9);
    }
  }
}

TEST_CASE("chained propagation equals direct propagation") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto views = random_views(rng, 16);
    const int a = trial % 16, b = (trial + 5) % 16;
    const ReferenceAnnotation ann = random_annotation(rng, a, 3);
    const auto direct = propagate_poses(ann, views);
    const auto via_b = propagate_poses(as_reference(direct, b), views);
    for (const auto &[c, entries] : direct)
      for (std::size_t i = 0; i < entries.size(); ++i)
        CHECK(entries[i].cam_from_model.max_abs_difference(via_b.at(c)[i].cam_from_model) < 1e-9);
  }
}

TEST_CASE("propagation errors") {
  std::vector<ViewRecord> views = {view_with(0, Pose::identity()), view_with(1, Pose::identity())};
  ReferenceAnnotation ann;
  ann.ref_view_id = 5;
  CHECK(error_code_of([&] { propagate_poses(ann, views); }) == ErrorCode::kInvalidArgument);
  ann.ref_view_id = 0;
  views[1].world_to_cam.reset();
  CHECK(error_code_of([&] { propagate_poses(ann, views); }) == ErrorCode::kMissingWorldTransform);
  CHECK(error_message_of([&] { propagate_poses(ann, views); }).find("1") != std::string::npos);
}

TEST_CASE("annotation documents round trip") {
  TempDir dir;
  std::mt19937_64 rng(4);
  ReferenceAnnotation ann = random_annotation(rng, 3, 4);
  ann.scene_id = 12;
  write_annotation(dir.path() / "a.json", ann);
  CHECK(read_annotation(dir.path() / "a.json") == ann);
  auto doc = nlohmann::json::parse(annotation_to_json(ann).dump());
  doc["poses"][1]["cam_R_m2c"][0] = 3.0;
  CHECK(error_code_of([&] { annotation_from_json(doc); }).has_value());
}

TEST_CASE("visibility statistics") {
  const TriangleMesh cube = TriangleMesh::box({100, 100, 100});
  MeshLibrary meshes{{1, cube}, {2, TriangleMesh::box({300, 300, 50})}};
  GroundTruthOptions opts;
  opts.use_captured_depth = false;

  SUBCASE("single unoccluded object") {
    const auto gt = generate_ground_truth(
        single_view_scene({{1, Pose::from_translation({0, 0, 600})}}), meshes, opts);
    const ViewGroundTruth &v = gt.front();
    CHECK(v.visible[0].same_pixels(v.amodal[0]));
    CHECK(v.info[0].visib_fract == 1.0);
    CHECK(v.info[0].px_count_valid_depth == v.info[0].px_count_amodal);
    CHECK(v.info[0].bbox_visible == v.amodal[0].bbox());
  }
  SUBCASE("cube hidden behind a larger box") {
    const auto gt = generate_ground_truth(
        single_view_scene({{1, Pose::from_translation({0, 0, 700})},
                           {2, Pose::from_translation({0, 0, 400})}}),
        meshes, opts);
    const ViewGroundTruth &v = gt.front();
    CHECK(v.amodal[0].area() > 0);
    CHECK(v.visible[0].area() == 0);
    CHECK(v.info[0].visib_fract == 0.0);
    CHECK(v.info[0].bbox_visible == BoundingBox{0, 0, 0, 0});
  }
  SUBCASE("half-covered cube against the ray-cast oracle") {
    const TwoCubeScene s = two_cube_scene();
    MeshLibrary cubes{{1, s.cube_a}, {2, s.cube_b}};
    const auto gt = generate_ground_truth(
        single_view_scene({{1, Pose::identity()}, {2, Pose::identity()}}), cubes, opts);
    const GtInfo &info = gt.front().info[0];

    const DepthBuffer a = raycast(s.cube_a, Pose::identity(), s.k);
    const DepthBuffer b = raycast(s.cube_b, Pose::identity(), s.k);
    long long amodal = 0, visible = 0;
    int min_u = s.k.width, max_u = -1;
    for (int v = 0; v < s.k.height; ++v)
      for (int u = 0; u < s.k.width; ++u) {
        if (!a.has_surface(u, v)) continue;
        ++amodal;
        min_u = std::min(min_u, u);
        max_u = std::max(max_u, u);
        visible += a.at(u, v) < b.at(u, v);
      }
    const double oracle = static_cast<double>(visible) / static_cast<double>(amodal);
    // one pixel column of the occluded footprint
    const double step = 1.0 / (max_u - min_u + 1);
    CAPTURE(info.visib_fract);
    CAPTURE(oracle);
    CHECK(std::abs(info.visib_fract - 0.5) <= step);
    CHECK(std::abs(info.visib_fract - oracle) <= step);
    CHECK(gt.front().info[1].visib_fract == 1.0);
  }
  SUBCASE("missing mesh") {
    CHECK(error_code_of([&] {
            generate_ground_truth(single_view_scene({{9, Pose::identity()}}), meshes, opts);
          }) == ErrorCode::kMeshNotFound);
  }
}

TEST_CASE("gt info from explicit masks") {
  InstanceMask amodal(8, 8), visible(8, 8);
  amodal.fill_rect(1, 1, 7, 5);
  visible.fill_rect(1, 1, 4, 5);
  DepthImage depth(8, 8, 0);
  for (int u = 0; u < 8; ++u) depth.at(u, 2) = 900;
  const GtInfo info = compute_gt_info(visible, amodal, &depth);
  CHECK(info.px_count_amodal == 24);
  CHECK(info.px_count_visible == 12);
  CHECK(info.px_count_valid_depth == 6);
  CHECK(info.visib_fract == 0.5);
  CHECK(info.bbox_amodal == BoundingBox{1, 1, 6, 4});
  CHECK(info.bbox_visible == BoundingBox{1, 1, 3, 4});
  CHECK(compute_gt_info(InstanceMask(8, 8), InstanceMask(8, 8), nullptr).visib_fract == 0.0);
}

TEST_CASE("ground truth of a ring scene") {
  TempDir dir;
  FixtureOptions o;
  o.views = 6;
  const SceneFixture f = build_scene(dir.path(), o);
  SceneBundle scene = load_scene(f.scene_dir);
  scene.gt = propagate_poses(f.annotation, scene.views);
  const MeshLibrary meshes = load_models(dir.path(), {1, 2});

  const auto serial = generate_ground_truth(scene, meshes, {}, Execution::kSerial);
  const auto parallel = generate_ground_truth(scene, meshes, {}, Execution::kParallel);
  REQUIRE(serial.size() == 6);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    const auto &v = serial[i];
    CHECK(v.info == parallel[i].info);
    long long sum = 0;
    for (std::size_t a = 0; a < v.visible.size(); ++a) {
      CHECK(v.visible[a].same_pixels(parallel[i].visible[a]));
      CHECK(intersection_area(v.visible[a], v.amodal[a]) == v.visible[a].area());
      CHECK(v.info[a].px_count_visible <= v.info[a].px_count_amodal);
      // rendered fixture depth is the capture, so every amodal pixel is valid
      // unless the other object hides it
      CHECK(v.info[a].px_count_valid_depth >= v.info[a].px_count_visible);
      sum += v.visible[a].area();
      for (std::size_t b = a + 1; b < v.visible.size(); ++b)
        CHECK(intersection_area(v.visible[a], v.visible[b]) == 0);
    }
    CHECK(sum <= 128 * 128);
    CHECK(v.visible[0].area() > 0);
  }

  write_ground_truth(f.scene_dir, serial);
  const auto masks = read_view_masks(f.scene_dir, 2, 2, true);
  CHECK(masks[1].same_pixels(serial[2].visible[1]));

  GroundTruthOptions half;
  half.resolution = std::make_pair(64, 64);
  const auto small = generate_ground_truth(scene, meshes, half);
  CHECK(small.front().visible.front().width() == 64);
}
