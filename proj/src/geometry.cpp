#include "dopose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "dopose/errors.hpp"
#include "dopose/mask.hpp"

namespace dopose {

bool is_rotation(const Eigen::Matrix3d &r, double tolerance) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(r.determinant() - 1.0) <= tolerance;
}

Pose::Pose(const Eigen::Matrix3d &rotation, const Eigen::Vector3d &translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation_))
    fail(ErrorCode::kInvalidPose, "rotation is not orthonormal with determinant +1");
  if (!translation_.allFinite()) fail(ErrorCode::kInvalidPose, "translation is not finite");
}

Pose Pose::from_arrays(std::span<const double> rotation_row_major,
                       std::span<const double> translation) {
  if (rotation_row_major.size() != 9 || translation.size() != 3)
    fail(ErrorCode::kInvalidPose, "pose needs 9 rotation and 3 translation values");
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = rotation_row_major[static_cast<std::size_t>(i * 3 + j)];
  return {r, Eigen::Vector3d(translation[0], translation[1], translation[2])};
}

std::array<double, 9> Pose::rotation_row_major() const {
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(i * 3 + j)] = rotation_(i, j);
  return out;
}

std::array<double, 3> Pose::translation_array() const {
  return {translation_.x(), translation_.y(), translation_.z()};
}

double Pose::max_abs_difference(const Pose &other) const {
  return std::max((rotation_ - other.rotation_).cwiseAbs().maxCoeff(),
                  (translation_ - other.translation_).cwiseAbs().maxCoeff());
}

Pose compose(const Pose &a, const Pose &b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

Pose invert(const Pose &p) {
  const Eigen::Matrix3d rt = p.rotation().transpose();
  return {rt, -(rt * p.translation())};
}

Eigen::Matrix3d rotation_x(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Eigen::Matrix3d rotation_y(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Eigen::Matrix3d rotation_z(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

std::vector<Eigen::Vector3d> transform_points(const Pose &pose,
                                              std::span<const Eigen::Vector3d> points) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(points.size());
  for (const auto &p : points) out.push_back(pose * p);
  return out;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    fail(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) fail(ErrorCode::kInvalidArgument, "image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
    fail(ErrorCode::kInvalidArgument, "principal point outside the image");
}

std::array<double, 9> CameraIntrinsics::matrix_row_major() const {
  return {fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0};
}

CameraIntrinsics CameraIntrinsics::from_matrix(std::span<const double> k, int width, int height) {
  if (k.size() != 9) fail(ErrorCode::kInvalidArgument, "cam_K needs 9 values");
  CameraIntrinsics out{k[0], k[4], k[2], k[5], width, height};
  out.validate();
  return out;
}

CameraIntrinsics CameraIntrinsics::resized(int new_width, int new_height) const {
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  CameraIntrinsics out{fx * sx, fy * sy, cx * sx, cy * sy, new_width, new_height};
  out.validate();
  return out;
}

void PointCloud::validate() const {
  const std::size_t n = points.size();
  const auto check = [n](std::size_t m, const char *what) {
    if (m != 0 && m != n)
      fail(ErrorCode::kDimensionMismatch,
           std::string(what) + " has " + std::to_string(m) + " entries for " + std::to_string(n) +
               " points");
  };
  check(colors.size(), "colors");
  check(normals.size(), "normals");
  check(labels.size(), "labels");
  check(pixels.size(), "pixels");
}

PointCloud PointCloud::subset(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) {
    out.points.push_back(points[i]);
    if (has_colors()) out.colors.push_back(colors[i]);
    if (has_normals()) out.normals.push_back(normals[i]);
    if (has_labels()) out.labels.push_back(labels[i]);
    if (!pixels.empty()) out.pixels.push_back(pixels[i]);
  }
  return out;
}

PointCloud deproject(const DepthImage &depth, const CameraIntrinsics &k, double depth_scale,
                     const InstanceMask *mask, const RgbImage *rgb) {
  if (!depth.same_shape(k.width, k.height))
    fail(ErrorCode::kDimensionMismatch, "depth image size differs from camera intrinsics");
  if (mask && (mask->width() != k.width || mask->height() != k.height))
    fail(ErrorCode::kDimensionMismatch, "mask size differs from camera intrinsics");
  if (rgb && !rgb->same_shape(k.width, k.height))
    fail(ErrorCode::kDimensionMismatch, "rgb image size differs from camera intrinsics");
  if (!(depth_scale > 0.0)) fail(ErrorCode::kInvalidArgument, "depth_scale must be positive");

  PointCloud cloud;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const std::uint16_t d = depth.at(u, v);
      if (d == 0) continue;
      if (mask && !mask->test(u, v)) continue;
      const double z = d * depth_scale;
      cloud.points.emplace_back((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z);
      cloud.pixels.push_back({u, v});
      if (rgb) cloud.colors.push_back(rgb->at(u, v));
    }
  }
  return cloud;
}

CovarianceFit fit_covariance(std::span<const Eigen::Vector3d> points,
                             std::span<const std::size_t> indices) {
  CovarianceFit fit;
  fit.centroid.setZero();
  for (std::size_t i : indices) fit.centroid += points[i];
  fit.centroid /= static_cast<double>(indices.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i : indices) {
    const Eigen::Vector3d d = points[i] - fit.centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(indices.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  fit.eigenvalues = solver.eigenvalues();
  fit.normal = solver.eigenvectors().col(0).normalized();
  return fit;
}

CovarianceFit fit_covariance(std::span<const Eigen::Vector3d> points) {
  std::vector<std::size_t> all(points.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return fit_covariance(points, all);
}

// --- exact k-d tree -------------------------------------------------------

namespace {
constexpr std::size_t kLeafSize = 12;
}

KdTree::KdTree(std::span<const Eigen::Vector3d> points)
    : points_(points.begin(), points.end()), order_(points.size()) {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!points_.empty()) build(0, order_.size(), 0);
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= kLeafSize || depth > 64) return id;

  Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = split;
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

std::vector<std::size_t> KdTree::nearest(const Eigen::Vector3d &query, std::size_t k) const {
  using Entry = std::pair<double, std::size_t>;  // (squared distance, index); max-heap
  std::priority_queue<Entry> heap;
  k = std::min(k, points_.size());
  if (k == 0) return {};

  const auto consider = [&](std::size_t idx) {
    const Entry e{(points_[idx] - query).squaredNorm(), idx};
    if (heap.size() < k) {
      heap.push(e);
    } else if (e < heap.top()) {
      heap.pop();
      heap.push(e);
    }
  };

  // Iterative depth-first search with plane-distance pruning.
  std::vector<std::pair<int, double>> stack{{0, 0.0}};
  while (!stack.empty()) {
    const auto [id, plane_dist2] = stack.back();
    stack.pop_back();
    if (heap.size() == k && plane_dist2 > heap.top().first) continue;
    const Node &node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) consider(order_[i]);
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    // Equal coordinates may sit on either side of the split, so the far side
    // is only pruned by strictly positive distance.
    stack.push_back({far, std::max(plane_dist2, diff * diff)});
    stack.push_back({near, plane_dist2});
  }

  std::vector<std::size_t> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

NormalEstimate estimate_normals(const PointCloud &cloud, std::size_t k_neighbors,
                                const Eigen::Vector3d &viewpoint, Execution exec) {
  if (k_neighbors < 3) fail(ErrorCode::kInvalidArgument, "k_neighbors must be at least 3");
  if (cloud.size() < k_neighbors)
    fail(ErrorCode::kTooFewPoints, "cloud has fewer points than k_neighbors");

  NormalEstimate result{cloud, {}};
  const std::span<const Eigen::Vector3d> points(cloud.points);
  const KdTree tree(points);
  const auto n = static_cast<std::ptrdiff_t>(cloud.size());
  std::vector<Eigen::Vector3d> normals(cloud.size(), Eigen::Vector3d::Zero());
  std::vector<std::uint8_t> degenerate(cloud.size(), 0);

  const auto estimate_one = [&](std::ptrdiff_t i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::vector<std::size_t> nbrs = tree.nearest(points[idx], k_neighbors);
    const CovarianceFit fit = fit_covariance(points, nbrs);
    const double scale = std::max(fit.eigenvalues[2], 1e-300);
    if (fit.eigenvalues[1] <= 1e-12 * scale) {
      degenerate[idx] = 1;
      return;
    }
    Eigen::Vector3d normal = fit.normal;
    if (normal.dot(viewpoint - points[idx]) < 0.0) normal = -normal;
    normals[idx] = normal;
  };

  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) estimate_one(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) estimate_one(i);
  }

  result.cloud.normals = std::move(normals);
  for (std::size_t i = 0; i < degenerate.size(); ++i)
    if (degenerate[i]) result.degenerate.push_back(i);
  return result;
}

}  // namespace dopose
