#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dopose/execution.hpp"
#include "dopose/image.hpp"

namespace dopose {

class InstanceMask;

/**
 * Rigid transform in SE(3). Translation is in millimeters.
 *
 * The rotation is validated at construction: RᵀR = I and det R = +1 within
 * `kRotationTolerance`. A Pose maps x to R·x + t.
 */
class Pose {
 public:
  static constexpr double kRotationTolerance = 1e-6;

  Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  Pose(const Eigen::Matrix3d &rotation, const Eigen::Vector3d &translation);

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d &t) {
    return {Eigen::Matrix3d::Identity(), t};
  }
  // Row-major 9 + 3 values, the BOP on-disk convention.
  static Pose from_arrays(std::span<const double> rotation_row_major,
                          std::span<const double> translation);

  const Eigen::Matrix3d &rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d &translation() const noexcept { return translation_; }

  std::array<double, 9> rotation_row_major() const;
  std::array<double, 3> translation_array() const;

  Eigen::Vector3d operator*(const Eigen::Vector3d &x) const {
    return rotation_ * x + translation_;
  }

  // Largest absolute element difference over R and t.
  double max_abs_difference(const Pose &other) const;

  friend bool operator==(const Pose &a, const Pose &b) {
    return a.rotation_ == b.rotation_ && a.translation_ == b.translation_;
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

bool is_rotation(const Eigen::Matrix3d &r, double tolerance = Pose::kRotationTolerance);

// x ↦ a.R·(b.R·x + b.t) + a.t
Pose compose(const Pose &a, const Pose &b);
// (Rᵀ, −Rᵀ·t)
Pose invert(const Pose &p);

Eigen::Matrix3d rotation_x(double radians);
Eigen::Matrix3d rotation_y(double radians);
Eigen::Matrix3d rotation_z(double radians);

std::vector<Eigen::Vector3d> transform_points(const Pose &pose,
                                              std::span<const Eigen::Vector3d> points);

// Pinhole intrinsics; pixel (u, v) denotes the pixel center.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Throws Error(kInvalidArgument) if fx, fy ≤ 0 or the principal point lies
  // outside [0, width) × [0, height).
  void validate() const;

  // Row-major K as stored in BOP `cam_K`.
  std::array<double, 9> matrix_row_major() const;
  static CameraIntrinsics from_matrix(std::span<const double> k_row_major, int width,
                                      int height);

  // Same field of view at a different resolution.
  CameraIntrinsics resized(int new_width, int new_height) const;

  Eigen::Vector2d project(const Eigen::Vector3d &p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }

  friend bool operator==(const CameraIntrinsics &, const CameraIntrinsics &) = default;
};

struct PixelCoord {
  int u = 0;
  int v = 0;
  friend bool operator==(const PixelCoord &, const PixelCoord &) = default;
};

/**
 * Point set in millimeters with optional per-point attributes. Optional
 * attribute vectors are either empty or have exactly `points.size()` entries.
 * A zero normal marks a point whose neighborhood was degenerate.
 */
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Rgb> colors;
  std::vector<Eigen::Vector3d> normals;
  std::vector<int> labels;
  std::vector<PixelCoord> pixels;  // source pixel, when deprojected

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_colors() const noexcept { return !colors.empty(); }
  bool has_normals() const noexcept { return !normals.empty(); }
  bool has_labels() const noexcept { return !labels.empty(); }

  // Throws Error(kDimensionMismatch) when an attribute vector has the wrong size.
  void validate() const;

  // Copies the listed points together with their attributes.
  PointCloud subset(std::span<const std::size_t> indices) const;
};

/**
 * Back-projects valid depth pixels (raw value > 0) to camera-frame points:
 * Z = d·depth_scale, X = (u−cx)·Z/fx, Y = (v−cy)·Z/fy. Points are emitted in
 * row-major pixel order and keep their source pixel. When `mask` is given,
 * only pixels inside it are used; when `rgb` is given, colors are copied.
 */
PointCloud deproject(const DepthImage &depth, const CameraIntrinsics &k, double depth_scale,
                     const InstanceMask *mask = nullptr, const RgbImage *rgb = nullptr);

struct NormalEstimate {
  PointCloud cloud;                     // input cloud with `normals` filled
  std::vector<std::size_t> degenerate;  // points whose neighborhood has rank < 2
};

// Per-point normal from the covariance of its k nearest neighbors (exact
// search, the point itself included), oriented so that
// normal · (viewpoint − point) > 0.
NormalEstimate estimate_normals(const PointCloud &cloud, std::size_t k_neighbors,
                                const Eigen::Vector3d &viewpoint,
                                Execution exec = Execution::kParallel);

// Exact k-nearest-neighbor index over a fixed point set.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points);

  // Indices of the k nearest points to `query`, nearest first. Ties are
  // broken by lower index.
  std::vector<std::size_t> nearest(const Eigen::Vector3d &query, std::size_t k) const;

 private:
  struct Node {
    std::size_t begin, end;  // range in order_
    int axis;                // -1 for leaf
    double split;
    int left, right;
  };
  int build(std::size_t begin, std::size_t end, int depth);

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

// Plane fit through the centroid: returns (unit normal of smallest variance,
// centroid, eigenvalues ascending).
struct CovarianceFit {
  Eigen::Vector3d normal;
  Eigen::Vector3d centroid;
  Eigen::Vector3d eigenvalues;
};
CovarianceFit fit_covariance(std::span<const Eigen::Vector3d> points);
CovarianceFit fit_covariance(std::span<const Eigen::Vector3d> points,
                             std::span<const std::size_t> indices);

}  // namespace dopose
