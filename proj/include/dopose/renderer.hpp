#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dopose/execution.hpp"
#include "dopose/geometry.hpp"
#include "dopose/image.hpp"
#include "dopose/mask.hpp"

namespace dopose {

// Vertices in millimeters (model frame), triangles as vertex index triples.
struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const noexcept { return triangles.empty(); }
  // Throws Error(kInvalidArgument) on an out-of-range index.
  void validate() const;

  // Axis-aligned box with the given size centered at `center`, 12 triangles
  // with outward winding.
  static TriangleMesh box(const Eigen::Vector3d &size,
                          const Eigen::Vector3d &center = Eigen::Vector3d::Zero());
};

// Polygon file format. ASCII and binary little-endian inputs are accepted;
// faces with more than three vertices are fan-triangulated.
TriangleMesh read_ply_mesh(const std::filesystem::path &path);
void write_ply_mesh(const std::filesystem::path &path, const TriangleMesh &mesh);

// Per-pixel camera-frame depth in millimeters; +inf marks "no surface".
class DepthBuffer {
 public:
  static constexpr double kNoSurface = std::numeric_limits<double>::infinity();

  DepthBuffer() = default;
  DepthBuffer(int width, int height) : depth_(width, height, kNoSurface) {}

  int width() const noexcept { return depth_.width(); }
  int height() const noexcept { return depth_.height(); }
  double at(int u, int v) const { return depth_.at(u, v); }
  double &at(int u, int v) { return depth_.at(u, v); }
  double operator[](std::size_t i) const { return depth_[i]; }
  double &operator[](std::size_t i) { return depth_[i]; }
  bool has_surface(int u, int v) const { return depth_.at(u, v) != kNoSurface; }

  // Mask of covered pixels.
  InstanceMask coverage() const;
  // Depth rounded to raw units (mm / depth_scale), 0 where uncovered.
  DepthImage to_depth_image(double depth_scale) const;

  friend bool operator==(const DepthBuffer &, const DepthBuffer &) = default;

 private:
  Image<double> depth_;
};

inline constexpr double kNearPlaneMm = 1.0;

/**
 * Perspective z-buffer rasterization of `mesh` placed by `pose` (model to
 * camera). Triangles are clipped against the Z = 1 mm near plane. A pixel is
 * covered iff its center lies inside the projected triangle, with a top-left
 * rule on shared edges. Depth is interpolated perspective-correctly (1/Z).
 *
 * kSerial walks triangle by triangle; kParallel distributes image rows over
 * OpenMP threads. Both return bit-identical buffers.
 */
DepthBuffer rasterize(const TriangleMesh &mesh, const Pose &pose, const CameraIntrinsics &k,
                      Execution exec = Execution::kParallel);

struct CompositedMasks {
  std::vector<InstanceMask> visible;
  std::vector<InstanceMask> amodal;
};

// Amodal mask i: pixels where buffer i has a surface. Visible mask i: pixels
// where buffer i is strictly nearest, equal depths going to the lower id.
// Output order follows the input order; masks carry the instance id.
CompositedMasks composite_visible_masks(
    const std::vector<std::pair<int, DepthBuffer>> &buffers);

// Blends `tint` over the rendered silhouette of `mesh`:
// out = (1−alpha)·rgb + alpha·tint, rounded. Silhouette pixels with a
// 4-neighbor outside the silhouette are painted with the tint.
RgbImage render_overlay(const RgbImage &rgb, const TriangleMesh &mesh, const Pose &pose,
                        const CameraIntrinsics &k, Rgb tint, double alpha);

// Same blend for an already computed silhouette.
RgbImage blend_silhouette(const RgbImage &rgb, const InstanceMask &silhouette, Rgb tint,
                          double alpha);

}  // namespace dopose
