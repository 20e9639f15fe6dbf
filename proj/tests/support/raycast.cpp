#include "support/raycast.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "support/fixtures.hpp"

namespace dopose::testing {

namespace {

// Ray parameter t of the hit, or a negative value.
double intersect(const Eigen::Vector3d &dir, const Eigen::Vector3d &a, const Eigen::Vector3d &b,
                 const Eigen::Vector3d &c) {
  const Eigen::Vector3d e1 = b - a, e2 = c - a;
  const Eigen::Vector3d p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-12) return -1.0;
  const double inv = 1.0 / det;
  const Eigen::Vector3d s = -a;  // ray origin is the camera center
  const double bu = s.dot(p) * inv;
  if (bu < 0.0 || bu > 1.0) return -1.0;
  const Eigen::Vector3d q = s.cross(e1);
  const double bv = dir.dot(q) * inv;
  if (bv < 0.0 || bu + bv > 1.0) return -1.0;
  return e2.dot(q) * inv;
}

}  // namespace

DepthBuffer raycast(const TriangleMesh &mesh, const Pose &pose, const CameraIntrinsics &k) {
  DepthBuffer out(k.width, k.height);
  const auto verts = transform_points(pose, mesh.vertices);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      // z component 1, so the ray parameter equals camera-frame depth
      const Eigen::Vector3d dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      double best = DepthBuffer::kNoSurface;
      for (const auto &t : mesh.triangles) {
        const double z = intersect(dir, verts[t[0]], verts[t[1]], verts[t[2]]);
        if (z >= kNearPlaneMm && z < best) best = z;
      }
      out.at(u, v) = best;
    }
  }
  return out;
}

BufferAgreement compare_buffers(const DepthBuffer &a, const DepthBuffer &b, double tolerance) {
  BufferAgreement r;
  for (int v = 0; v < a.height(); ++v) {
    for (int u = 0; u < a.width(); ++u) {
      ++r.pixels;
      const bool ca = a.has_surface(u, v), cb = b.has_surface(u, v);
      if (ca != cb) {
        ++r.coverage_mismatch;
      } else if (ca) {
        const double d = std::abs(a.at(u, v) - b.at(u, v));
        r.max_depth_error = std::max(r.max_depth_error, d);
        if (d > tolerance) ++r.depth_mismatch;
      }
    }
  }
  return r;
}

TwoCubeScene two_cube_scene() {
  TwoCubeScene s;
  s.k = test_camera();
  s.cube_a = TriangleMesh::box({100, 100, 100}, {0, 0, 600});
  s.cube_b = TriangleMesh::box({100, 100, 100}, {50, 0, 450});
  return s;
}

}  // namespace dopose::testing
