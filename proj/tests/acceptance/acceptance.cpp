// Acceptance gate: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <json.hpp>

#include "dopose/annotation.hpp"
#include "dopose/bop.hpp"
#include "dopose/eval.hpp"
#include "dopose/fileio.hpp"
#include "dopose/grasp.hpp"
#include "support/assignment.hpp"
#include "support/fixtures.hpp"
#include "support/raycast.hpp"

using namespace dopose;
using namespace dopose::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char *format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

Outcome rasterizer_oracle() {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> objects(1, 4);
  const CameraIntrinsics k = test_camera();
  double worst_agreement = 1.0, worst_depth = 0.0;
  bool depth_ok = true;
  for (int scene = 0; scene < 50; ++scene) {
    const int n = objects(rng);
    const int budget = 200 / n;
    std::uniform_int_distribution<int> tris(1, budget);
    std::vector<std::pair<int, DepthBuffer>> raster, oracle;
    for (int id = 1; id <= n; ++id) {
      const TriangleMesh mesh = random_mesh(rng, tris(rng));
      const Pose pose = random_pose(rng, 30.0);
      raster.emplace_back(id, rasterize(mesh, pose, k));
      oracle.emplace_back(id, raycast(mesh, pose, k));
      for (int v = 0; v < k.height; ++v)
        for (int u = 0; u < k.width; ++u)
          if (raster.back().second.has_surface(u, v) && oracle.back().second.has_surface(u, v)) {
            const double d = std::abs(raster.back().second.at(u, v) - oracle.back().second.at(u, v));
            worst_depth = std::max(worst_depth, d);
            depth_ok = depth_ok && d <= 0.1;
          }
    }
    const CompositedMasks a = composite_visible_masks(raster);
    const CompositedMasks b = composite_visible_masks(oracle);
    long long agree = 0;
    const long long pixels = static_cast<long long>(k.width) * k.height;
    for (long long p = 0; p < pixels; ++p) {
      bool same = true;
      for (std::size_t i = 0; i < a.visible.size(); ++i) {
        const auto idx = static_cast<std::size_t>(p);
        same = same && a.visible[i].test_index(idx) == b.visible[i].test_index(idx) &&
               a.amodal[i].test_index(idx) == b.amodal[i].test_index(idx);
      }
      agree += same;
    }
    worst_agreement = std::min(worst_agreement, static_cast<double>(agree) / static_cast<double>(pixels));
  }
  return {worst_agreement >= 0.999 && depth_ok,
          fmt("worst scene agreement %.5f, max depth error %.2e mm", worst_agreement, worst_depth)};
}

ReferenceAnnotation reference_from(const std::map<int, std::vector<GtEntry>> &gt, int view) {
  ReferenceAnnotation ann;
  ann.ref_view_id = view;
  for (const auto &e : gt.at(view)) ann.poses.push_back({e.obj_id, e.cam_from_model});
  return ann;
}

Outcome pose_propagation() {
  std::mt19937_64 rng(7);
  double worst_chain = 0.0, worst_round = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ViewRecord> views;
    for (int i = 0; i < 16; ++i) {
      ViewRecord v;
      v.view_id = i;
      v.world_to_cam = random_pose(rng, 1000.0);
      views.push_back(v);
    }
    ReferenceAnnotation ann;
    ann.ref_view_id = trial % 16;
    for (int o = 1; o <= 3; ++o) ann.poses.push_back({o, random_pose(rng, 500.0)});
    const auto direct = propagate_poses(ann, views);
    for (std::size_t i = 0; i < ann.poses.size(); ++i)
      worst_round = std::max(worst_round, direct.at(ann.ref_view_id)[i].cam_from_model.max_abs_difference(
                                              ann.poses[i].cam_from_model));
    for (int b = 0; b < 16; ++b) {
      const auto via = propagate_poses(reference_from(direct, b), views);
      for (const auto &[c, entries] : direct)
        for (std::size_t i = 0; i < entries.size(); ++i)
          worst_chain = std::max(worst_chain, entries[i].cam_from_model.max_abs_difference(via.at(c)[i].cam_from_model));
    }
  }
  return {worst_chain <= 1e-9 && worst_round <= 1e-9,
          fmt("max chain deviation %.2e, max round-trip deviation %.2e", worst_chain, worst_round)};
}

Outcome occlusion_statistics() {
  const TwoCubeScene s = two_cube_scene();
  SceneBundle scene;
  ViewRecord view;
  view.cam_K = s.k;
  scene.views.push_back(view);
  scene.gt[0] = {{1, Pose::identity()}, {2, Pose::identity()}};
  GroundTruthOptions opts;
  opts.use_captured_depth = false;
  const auto gt = generate_ground_truth(scene, {{1, s.cube_a}, {2, s.cube_b}}, opts);
  const double vf = gt.front().info[0].visib_fract;

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
  const double step = 1.0 / (max_u - min_u + 1);
  return {std::abs(vf - 0.5) <= step && std::abs(vf - oracle) <= step,
          fmt("visib_fract %.4f, oracle %.4f, step %.4f", vf, oracle, step)};
}

InstanceMask rect(int w, int h, int u0, int v0, int u1, int v1) {
  InstanceMask m(w, h);
  m.fill_rect(u0, v0, u1, v1);
  return m;
}

Outcome metrics_oracle() {
  bool ok = true;
  std::ostringstream detail;

  MasksByImage gt{{1, {rect(16, 16, 1, 1, 6, 6), rect(16, 16, 8, 8, 14, 15)}}, {2, {rect(16, 16, 0, 0, 16, 3)}}};
  std::vector<Prediction> perfect;
  for (const auto &[id, masks] : gt)
    for (const auto &m : masks) perfect.push_back({id, m, 1.0});
  const ApAr p = coco_ap_ar(perfect, gt, IouMode::kMask);
  const ApAr e = coco_ap_ar({}, gt, IouMode::kMask);
  ok = ok && std::abs(p.ap - 100) < 1e-9 && std::abs(p.ar - 100) < 1e-9 && e.ap == 0 && e.ar == 0;
  detail << "perfect " << p.ap << "/" << p.ar << ", empty " << e.ap << "/" << e.ar;

  const json doc = json::parse(read_text_file(DOPOSE_TEST_DATA "/coco_fixtures.json"));
  double worst = 0.0;
  int hungarian_cases = 0;
  double worst_assignment = 0.0;
  for (const auto &fx : doc["fixtures"]) {
    const CocoGroundTruth g = parse_coco_ground_truth(fx["gt"]);
    const auto preds = parse_coco_results(fx["results"]);
    for (auto [mode, key] : {std::pair{IouMode::kMask, "segm"}, std::pair{IouMode::kBox, "bbox"}}) {
      const ApAr r = coco_ap_ar(preds, g.masks, mode);
      worst = std::max({worst, std::abs(r.ap - fx[key]["ap"].get<double>()),
                        std::abs(r.ar - fx[key]["ar"].get<double>())});
    }
    // assignment over the fixture's own masks, per image
    for (const auto &[image, gts] : g.masks) {
      std::vector<const InstanceMask *> mine;
      for (const auto &pr : preds)
        if (pr.image_id == image) mine.push_back(&pr.mask);
      if (mine.empty() || gts.empty() || mine.size() > 7 || gts.size() > 7) continue;
      Eigen::MatrixXd f(static_cast<Eigen::Index>(mine.size()), static_cast<Eigen::Index>(gts.size()));
      for (std::size_t i = 0; i < mine.size(); ++i)
        for (std::size_t j = 0; j < gts.size(); ++j) {
          const double inter = static_cast<double>(intersection_area(*mine[i], gts[j]));
          f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              inter > 0 ? 2 * inter / static_cast<double>(mine[i]->area() + gts[j].area()) : 0.0;
        }
      const auto assignment = hungarian_maximize(f);
      double total = 0.0;
      for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] >= 0) total += f(static_cast<Eigen::Index>(i), assignment[i]);
      worst_assignment = std::max(worst_assignment, std::abs(total - brute_force_assignment(f)));
      ++hungarian_cases;
    }
  }
  // plus random weight matrices up to 7 × 7
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 7);
  std::uniform_real_distribution<double> w(0, 1);
  for (int t = 0; t < 300; ++t) {
    Eigen::MatrixXd m(dim(rng), dim(rng));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = w(rng);
    const auto assignment = hungarian_maximize(m);
    double total = 0.0;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] >= 0) total += m(static_cast<Eigen::Index>(i), assignment[i]);
    worst_assignment = std::max(worst_assignment, std::abs(total - brute_force_assignment(m)));
    ++hungarian_cases;
  }
  ok = ok && worst <= 0.1 && worst_assignment <= 1e-9 && doc["fixtures"].size() == 20;
  detail << ", reference max |diff| " << worst << " over " << doc["fixtures"].size()
         << " fixtures, assignment max |diff| " << worst_assignment << " over " << hungarian_cases << " cases";
  return {ok, detail.str()};
}

Outcome ransac_recovery() {
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(5000 + seed);
    std::uniform_real_distribution<double> xy(-100, 100);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 700; ++i) pts.emplace_back(xy(rng), xy(rng), 300.0);
    for (int i = 0; i < 300; ++i) pts.emplace_back(xy(rng), xy(rng), 300.0 + xy(rng));
    RansacConfig cfg;
    cfg.seed = seed;
    const PlaneModel plane = segment_biggest_plane(pts, cfg);
    std::size_t recovered = 0;
    for (std::size_t i : plane.inliers) recovered += i < 700;
    const double angle = std::acos(std::min(1.0, std::abs(plane.normal.z()))) * 180.0 / M_PI;
    passes += angle <= 1.0 && recovered >= 0.95 * 700;
  }
  return {passes >= 19, fmt("%.0f of 20 seeds pass", passes)};
}

Outcome grasp_end_to_end() {
  const double deg = M_PI / 180.0;
  // flat box top at 500 mm
  const CameraIntrinsics k = test_camera(128, 128);
  InstanceMask box(128, 128);
  box.fill_rect(40, 30, 90, 70);
  const DepthImage flat(128, 128, 5000);
  const RgbImage rgb(128, 128);
  const GraspPose g = compute_suction_grasp(rgb, flat, k, 0.1, box, {});
  const PointCloud cloud = deproject(flat, k, 0.1, &box);
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto &p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());
  const Eigen::Vector3d h_flat = (Eigen::Vector3d(0, 0, -1) + (-centroid).normalized()).normalized();
  const double pos_err = (g.position - centroid).norm();
  const double axis_err = (g.halfway() - h_flat).norm();

  // 45 degree face through (0, 0, 500)
  const Eigen::Vector3d n = Eigen::Vector3d(0, -1, -1).normalized();
  const Eigen::Vector3d c(0, 0, 500);
  DepthImage tilted(128, 128);
  for (int v = 0; v < 128; ++v)
    for (int u = 0; u < 128; ++u) {
      const Eigen::Vector3d ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      tilted.at(u, v) = static_cast<std::uint16_t>(std::lround(n.dot(c) / n.dot(ray) / 0.01));
    }
  InstanceMask face(128, 128);
  face.fill_rect(44, 44, 84, 84);
  const GraspPose t = compute_suction_grasp(rgb, tilted, k, 0.01, face, {});
  const Eigen::Vector3d bisector = (n + (-t.position).normalized()).normalized();
  const double tilt_err = std::atan2(t.halfway().cross(bisector).norm(), t.halfway().dot(bisector)) / deg;
  const double plane_dist = std::abs(n.dot(t.position - c));

  RansacConfig seeded;
  seeded.seed = 99;
  const bool deterministic = compute_suction_grasp(rgb, tilted, k, 0.01, face, seeded) ==
                             compute_suction_grasp(rgb, tilted, k, 0.01, face, seeded);
  return {pos_err <= 3.0 && axis_err <= 1e-6 && tilt_err <= 0.1 && plane_dist <= 3.0 && deterministic,
          fmt("flat: position %.1e mm, axis %.1e; tilted: %.4f deg, %.3f mm off plane", pos_err, axis_err,
              tilt_err, plane_dist) +
              (deterministic ? ", deterministic" : ", NOT deterministic")};
}

Outcome format_round_trips() {
  TempDir dir;
  const SceneFixture f = build_scene(dir.path());
  SceneBundle bundle = load_scene(f.scene_dir);
  bundle.gt = propagate_poses(f.annotation, bundle.views);
  const fs::path copy = dir.path() / "copy" / "000001";
  save_scene(bundle, copy);
  const bool scene_ok = load_scene(copy).same_content(bundle);

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dim(1, 64);
  std::uniform_real_distribution<double> unit(0, 1);
  int rle_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    InstanceMask m(dim(rng), dim(rng));
    const double p = unit(rng);
    for (int v = 0; v < m.height(); ++v)
      for (int u = 0; u < m.width(); ++u) m.set(u, v, unit(rng) < p);
    rle_ok += rle_decode(rle_encode(m)).same_pixels(m);
  }

  bool cloud_ok = true;
  for (const auto &view : bundle.views) {
    const DepthImage depth = read_depth(bundle.images.at(view.view_id).depth);
    const RgbImage rgb = read_rgb(bundle.images.at(view.view_id).rgb);
    long long valid = 0;
    for (auto d : depth.data()) valid += d > 0;
    cloud_ok = cloud_ok && static_cast<long long>(export_labeled_cloud(view, depth, rgb, {}).size()) == valid;
  }
  return {scene_ok && rle_ok == 1000 && cloud_ok,
          std::string("scene ") + (scene_ok ? "identical" : "DIFFERS") + ", RLE " + std::to_string(rle_ok) +
              "/1000, cloud counts " + (cloud_ok ? "match" : "DIFFER")};
}

int shell(const std::string &cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

Outcome cli_smoke() {
  TempDir dir;
  build_scene(dir.path());
  const std::string cli = std::string("'") + DOPOSE_CLI_PATH + "'";
  const std::string common = " --dataset '" + dir.path().string() + "' --scene 1";
  const std::string quiet = " 2>>'" + (dir.path() / "log.txt").string() + "'";
  const fs::path scene = dir.path() / "test" / "000001";
  const fs::path report = dir.path() / "report.json";

  std::vector<int> codes;
  codes.push_back(shell(cli + " propagate" + common + " >/dev/null" + quiet));
  codes.push_back(shell(cli + " render-masks" + common + " >/dev/null" + quiet));
  codes.push_back(shell(cli + " export coco" + common + " >/dev/null" + quiet));
  const std::string coco = "'" + (scene / "scene_gt_coco.json").string() + "'";
  codes.push_back(shell(cli + " evaluate --gt " + coco + " --results " + coco + " --format json >'" +
                        report.string() + "'" + quiet));
  bool all_zero = true;
  std::string code_list;
  for (int c : codes) {
    all_zero = all_zero && c == 0;
    code_list += (code_list.empty() ? "" : ",") + std::to_string(c);
  }
  if (!all_zero) return {false, "exit codes " + code_list};
  const json r = json::parse(read_text_file(report));
  const double ap = r["segm"]["ap"], f = r["overlap"]["f"];
  return {std::abs(ap - 100) < 1e-9 && std::abs(f - 100) < 1e-9,
          fmt("exit codes 0, AP %.1f, F %.1f", ap, f)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"rasterizer matches ray-cast oracle on 50 scenes", 60, rasterizer_oracle},
      {"pose propagation is transform-consistent", 1, pose_propagation},
      {"two-cube occlusion visib_fract", 1, occlusion_statistics},
      {"COCO metrics and overlap assignment oracles", 30, metrics_oracle},
      {"RANSAC plane recovery with 30% outliers", 10, ransac_recovery},
      {"suction grasp end to end", 5, grasp_end_to_end},
      {"format round trips", 10, format_round_trips},
      {"CLI pipeline smoke", 30, cli_smoke},
  };
  int failed = 0;
  for (const auto &c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.time_limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " ["
              << fmt("%.2f s of %.0f s", secs, c.time_limit_s) << (in_time ? "" : ", too slow") << "]\n";
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
