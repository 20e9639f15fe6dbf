#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dopose/execution.hpp"
#include "dopose/geometry.hpp"
#include "dopose/image.hpp"
#include "dopose/mask.hpp"

namespace dopose {

struct RansacConfig {
  int iterations = 500;
  double inlier_threshold = 3.0;  // mm
  std::size_t min_inliers = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

// {x : normal·x = offset}
struct PlaneModel {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
  std::vector<std::size_t> inliers;  // ascending point indices

  double signed_distance(const Eigen::Vector3d &x) const { return normal.dot(x) - offset; }
};

/**
 * Largest plane by RANSAC. Minimal samples are drawn serially from a
 * generator seeded with `cfg.seed`; hypothesis scoring runs in parallel in
 * kParallel and the first hypothesis with the most inliers wins, so the
 * result does not depend on the schedule. The winner is refit by least
 * squares over its inliers and the inliers are collected once more. The
 * normal is oriented toward the coordinate origin (the camera).
 *
 * Errors: kTooFewPoints (< 3 points), kNoPlaneFound (< min_inliers).
 */
PlaneModel segment_biggest_plane(std::span<const Eigen::Vector3d> points,
                                 const RansacConfig &cfg,
                                 Execution exec = Execution::kParallel);

// Inlier centroid projected orthogonally onto the plane.
Eigen::Vector3d plane_center(const PlaneModel &plane, std::span<const Eigen::Vector3d> points);

/**
 * Full tool orientation from a surface normal. The approach direction is the
 * halfway vector h = normalize(normal + normalize(camera_origin − center));
 * the rotation's Z column is −h, its Y column is `reference_y` projected onto
 * the plane orthogonal to h (camera X when that projection vanishes), and
 * X = Y × Z.
 */
Eigen::Matrix3d halfway_orientation(const Eigen::Vector3d &normal, const Eigen::Vector3d &center,
                                    const Eigen::Vector3d &camera_origin,
                                    const Eigen::Vector3d &reference_y = Eigen::Vector3d::UnitY(),
                                    const Eigen::Vector3d &fallback_x = Eigen::Vector3d::UnitX());

struct GraspPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();          // mm, camera frame
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();  // camera frame
  double quality = 1.0;

  // Direction the tool travels onto the surface (the Z column).
  Eigen::Vector3d approach_axis() const { return orientation.col(2); }
  // Surface-to-camera bisector, the negated Z column.
  Eigen::Vector3d halfway() const { return -orientation.col(2); }
  // (w, x, y, z) with w ≥ 0.
  std::array<double, 4> quaternion_wxyz() const;

  friend bool operator==(const GraspPose &, const GraspPose &) = default;
};

enum class NormalSource {
  kPlane,  // refined plane normal
  kLocal,  // k-NN normal of the inlier closest to the center
};

struct GraspOptions {
  NormalSource normal_source = NormalSource::kPlane;
  std::size_t normal_neighbors = 16;
  Eigen::Vector3d camera_origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d reference_y = Eigen::Vector3d::UnitY();
  Eigen::Vector3d fallback_x = Eigen::Vector3d::UnitX();
  Execution exec = Execution::kParallel;
};

// Plane, center and orientation steps on an already deprojected cloud.
GraspPose grasp_from_cloud(const PointCloud &cloud, const RansacConfig &cfg,
                           const GraspOptions &options = {}, double quality = 1.0);

/**
 * Suction grasp for one instance mask: masked deprojection, biggest plane,
 * camera-facing normal, plane center and halfway orientation. The quality is
 * the mask confidence (1 when absent).
 *
 * Errors: kEmptyMask, kDimensionMismatch, kTooFewPoints, kNoPlaneFound.
 */
GraspPose compute_suction_grasp(const RgbImage &rgb, const DepthImage &depth,
                                const CameraIntrinsics &k, double depth_scale,
                                const InstanceMask &mask, const RansacConfig &cfg,
                                const GraspOptions &options = {});

// Indices in descending confidence (stable); masks without a confidence last.
std::vector<std::size_t> rank_masks_by_confidence(std::span<const InstanceMask> masks);

nlohmann::ordered_json grasp_to_json(const GraspPose &grasp);

}  // namespace dopose
