// Serial reference vs OpenMP paths of the parallel kernels.
// Argument 0 = serial, 1 = parallel.

#include <random>

#include <benchmark/benchmark.h>

#include "dopose/annotation.hpp"
#include "dopose/eval.hpp"
#include "dopose/grasp.hpp"
#include "support/fixtures.hpp"

using namespace dopose;
using namespace dopose::testing;

namespace {

Execution mode(const benchmark::State &state) {
  return state.range(0) == 0 ? Execution::kSerial : Execution::kParallel;
}

void set_label(benchmark::State &state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_Rasterize(benchmark::State &state) {
  std::mt19937_64 rng(1);
  const TriangleMesh mesh = random_mesh(rng, 2000);
  const Pose pose = random_pose(rng, 20.0);
  const CameraIntrinsics k = test_camera(640, 480);
  for (auto _ : state) benchmark::DoNotOptimize(rasterize(mesh, pose, k, mode(state)));
  set_label(state);
}

void BM_EstimateNormals(benchmark::State &state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  PointCloud cloud;
  for (int i = 0; i < 20000; ++i) {
    Eigen::Vector3d p(g(rng), g(rng), g(rng));
    cloud.points.push_back(200.0 * p.normalized() + Eigen::Vector3d(0, 0, 800));
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_normals(cloud, 16, Eigen::Vector3d::Zero(), mode(state)));
  set_label(state);
}

void BM_Ransac(benchmark::State &state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> xy(-200, 200);
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 30000; ++i) pts.emplace_back(xy(rng), xy(rng), 600.0);
  for (int i = 0; i < 15000; ++i) pts.emplace_back(xy(rng), xy(rng), 600.0 + xy(rng));
  RansacConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(segment_biggest_plane(pts, cfg, mode(state)));
  set_label(state);
}

void BM_GroundTruth(benchmark::State &state) {
  TempDir dir;
  FixtureOptions o;
  o.width = 320;
  o.height = 240;
  const SceneFixture f = build_scene(dir.path(), o);
  SceneBundle scene = load_scene(f.scene_dir);
  scene.gt = propagate_poses(f.annotation, scene.views);
  const MeshLibrary meshes = load_models(dir.path(), {1, 2});
  for (auto _ : state) benchmark::DoNotOptimize(generate_ground_truth(scene, meshes, {}, mode(state)));
  set_label(state);
}

void BM_CocoEval(benchmark::State &state) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pos(0, 100), size(5, 40);
  std::uniform_real_distribution<double> score(0, 1);
  MasksByImage gt;
  std::vector<Prediction> preds;
  for (int img = 0; img < 64; ++img) {
    for (int i = 0; i < 20; ++i) {
      InstanceMask m(160, 160);
      const int u = pos(rng), v = pos(rng);
      m.fill_rect(u, v, u + size(rng), v + size(rng));
      gt[img].push_back(m);
      InstanceMask p(160, 160);
      p.fill_rect(u + 2, v + 1, u + size(rng), v + size(rng));
      preds.push_back({img, p, score(rng)});
    }
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(coco_ap_ar(preds, gt, IouMode::kMask, {}, mode(state)));
  set_label(state);
}

}  // namespace

BENCHMARK(BM_Rasterize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EstimateNormals)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Ransac)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GroundTruth)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CocoEval)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
