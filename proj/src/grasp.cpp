#include "dopose/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Geometry>

#include "dopose/errors.hpp"

namespace dopose {

void RansacConfig::validate() const {
  if (iterations < 1) fail(ErrorCode::kInvalidArgument, "RANSAC iterations must be at least 1");
  if (!(inlier_threshold > 0.0) || !std::isfinite(inlier_threshold))
    fail(ErrorCode::kInvalidArgument, "RANSAC inlier threshold must be positive");
}

namespace {

struct Hypothesis {
  Eigen::Vector3d normal;
  double offset = 0.0;
  bool valid = false;
};

constexpr int kSampleAttempts = 100;

// Draws three distinct, non-collinear points. Collinearity is judged
// relative to the edge lengths, so the outcome is invariant to rigid motion.
Hypothesis draw_hypothesis(std::span<const Eigen::Vector3d> points, std::mt19937_64 &rng) {
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  for (int attempt = 0; attempt < kSampleAttempts; ++attempt) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const Eigen::Vector3d e1 = points[b] - points[a];
    const Eigen::Vector3d e2 = points[c] - points[a];
    const Eigen::Vector3d n = e1.cross(e2);
    const double scale = e1.norm() * e2.norm();
    if (!(n.norm() > 1e-9 * scale)) continue;
    Hypothesis h;
    h.normal = n.normalized();
    h.offset = h.normal.dot(points[a]);
    h.valid = true;
    return h;
  }
  return {};
}

std::size_t count_inliers(std::span<const Eigen::Vector3d> points, const Eigen::Vector3d &normal,
                          double offset, double threshold) {
  std::size_t n = 0;
  for (const auto &p : points) n += std::abs(normal.dot(p) - offset) <= threshold;
  return n;
}

std::vector<std::size_t> collect_inliers(std::span<const Eigen::Vector3d> points,
                                         const Eigen::Vector3d &normal, double offset,
                                         double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (std::abs(normal.dot(points[i]) - offset) <= threshold) out.push_back(i);
  return out;
}

}  // namespace

PlaneModel segment_biggest_plane(std::span<const Eigen::Vector3d> points, const RansacConfig &cfg,
                                 Execution exec) {
  cfg.validate();
  if (points.size() < 3)
    fail(ErrorCode::kTooFewPoints,
         "plane search needs at least 3 points, got " + std::to_string(points.size()));

  std::mt19937_64 rng(cfg.seed);
  std::vector<Hypothesis> hypotheses(static_cast<std::size_t>(cfg.iterations));
  for (auto &h : hypotheses) h = draw_hypothesis(points, rng);

  std::vector<std::size_t> scores(hypotheses.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(hypotheses.size());
  const auto score = [&](std::ptrdiff_t i) {
    const auto &h = hypotheses[static_cast<std::size_t>(i)];
    if (h.valid)
      scores[static_cast<std::size_t>(i)] =
          count_inliers(points, h.normal, h.offset, cfg.inlier_threshold);
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) score(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) score(i);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  if (!hypotheses[best].valid || scores[best] < cfg.min_inliers || scores[best] < 3)
    fail(ErrorCode::kNoPlaneFound, "best plane has " + std::to_string(scores[best]) +
                                       " inliers, " + std::to_string(cfg.min_inliers) +
                                       " required");

  PlaneModel plane;
  const auto first =
      collect_inliers(points, hypotheses[best].normal, hypotheses[best].offset, cfg.inlier_threshold);
  const CovarianceFit fit = fit_covariance(points, first);
  plane.normal = fit.normal.normalized();
  plane.offset = plane.normal.dot(fit.centroid);
  if (plane.offset > 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  plane.inliers = collect_inliers(points, plane.normal, plane.offset, cfg.inlier_threshold);
  if (plane.inliers.size() < cfg.min_inliers || plane.inliers.empty())
    fail(ErrorCode::kNoPlaneFound, "refined plane keeps " + std::to_string(plane.inliers.size()) +
                                       " inliers, " + std::to_string(cfg.min_inliers) +
                                       " required");
  return plane;
}

Eigen::Vector3d plane_center(const PlaneModel &plane, std::span<const Eigen::Vector3d> points) {
  if (plane.inliers.empty()) fail(ErrorCode::kInvalidArgument, "plane has no inliers");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (std::size_t i : plane.inliers) {
    if (i >= points.size()) fail(ErrorCode::kInvalidArgument, "inlier index out of range");
    sum += points[i];
  }
  const Eigen::Vector3d centroid = sum / static_cast<double>(plane.inliers.size());
  return centroid - plane.normal * plane.signed_distance(centroid);
}

Eigen::Matrix3d halfway_orientation(const Eigen::Vector3d &normal, const Eigen::Vector3d &center,
                                    const Eigen::Vector3d &camera_origin,
                                    const Eigen::Vector3d &reference_y,
                                    const Eigen::Vector3d &fallback_x) {
  const Eigen::Vector3d to_camera = camera_origin - center;
  if (!(to_camera.norm() > 0.0)) fail(ErrorCode::kInvalidArgument, "center coincides with the camera");
  const Eigen::Vector3d n = normal.normalized();
  const Eigen::Vector3d view = to_camera.normalized();
  if (!(n.dot(view) > 0.0))
    fail(ErrorCode::kInvalidArgument, "normal does not face the camera");
  const Eigen::Vector3d h = (n + view).normalized();
  const Eigen::Vector3d z = -h;

  const auto project = [&](const Eigen::Vector3d &axis) -> Eigen::Vector3d {
    return axis - axis.dot(h) * h;
  };
  Eigen::Vector3d y = project(reference_y);
  if (y.norm() <= 1e-6 * reference_y.norm()) y = project(fallback_x);
  y.normalize();
  const Eigen::Vector3d x = y.cross(z);

  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

std::array<double, 4> GraspPose::quaternion_wxyz() const {
  Eigen::Quaterniond q(orientation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {q.w(), q.x(), q.y(), q.z()};
}

GraspPose grasp_from_cloud(const PointCloud &cloud, const RansacConfig &cfg,
                           const GraspOptions &options, double quality) {
  const PlaneModel plane = segment_biggest_plane(cloud.points, cfg, options.exec);
  const Eigen::Vector3d center = plane_center(plane, cloud.points);

  Eigen::Vector3d normal = plane.normal;
  if (options.normal_source == NormalSource::kLocal) {
    const PointCloud inliers = cloud.subset(plane.inliers);
    const std::size_t k = std::min(options.normal_neighbors, inliers.size());
    if (k >= 3) {
      const NormalEstimate est =
          estimate_normals(inliers, k, options.camera_origin, options.exec);
      const KdTree tree(inliers.points);
      const std::size_t nearest = tree.nearest(center, 1).front();
      const Eigen::Vector3d local = est.cloud.normals[nearest];
      if (local.norm() > 0.0) normal = local;
    }
  }
  if (normal.dot(options.camera_origin - center) < 0.0) normal = -normal;

  GraspPose grasp;
  grasp.position = center;
  grasp.orientation = halfway_orientation(normal, center, options.camera_origin,
                                          options.reference_y, options.fallback_x);
  grasp.quality = quality;
  return grasp;
}

GraspPose compute_suction_grasp(const RgbImage &rgb, const DepthImage &depth,
                                const CameraIntrinsics &k, double depth_scale,
                                const InstanceMask &mask, const RansacConfig &cfg,
                                const GraspOptions &options) {
  if (!depth.same_shape(mask.width(), mask.height()))
    fail(ErrorCode::kDimensionMismatch, "mask and depth differ in size");
  if (!rgb.same_shape(depth.width(), depth.height()))
    fail(ErrorCode::kDimensionMismatch, "rgb and depth differ in size");
  if (mask.area() == 0) fail(ErrorCode::kEmptyMask, "mask is empty");
  const PointCloud cloud = deproject(depth, k, depth_scale, &mask, &rgb);
  if (cloud.size() < 3)
    fail(ErrorCode::kTooFewPoints,
         "mask covers " + std::to_string(cloud.size()) + " valid depth pixels");
  return grasp_from_cloud(cloud, cfg, options, mask.confidence.value_or(1.0));
}

std::vector<std::size_t> rank_masks_by_confidence(std::span<const InstanceMask> masks) {
  std::vector<std::size_t> order(masks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &ca = masks[a].confidence, &cb = masks[b].confidence;
    if (ca.has_value() != cb.has_value()) return ca.has_value();
    return ca.has_value() && *ca > *cb;
  });
  return order;
}

nlohmann::ordered_json grasp_to_json(const GraspPose &grasp) {
  nlohmann::ordered_json j;
  j["position"] = {grasp.position.x(), grasp.position.y(), grasp.position.z()};
  std::vector<double> rows;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rows.push_back(grasp.orientation(r, c));
  j["orientation"] = rows;
  const auto q = grasp.quaternion_wxyz();
  j["quaternion_wxyz"] = {q[0], q[1], q[2], q[3]};
  j["quality"] = grasp.quality;
  return j;
}

}  // namespace dopose
