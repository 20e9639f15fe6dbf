#include "dopose/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "dopose/errors.hpp"

namespace dopose {

void TriangleMesh::validate() const {
  const auto n = static_cast<int>(vertices.size());
  for (std::size_t t = 0; t < triangles.size(); ++t)
    for (int idx : triangles[t])
      if (idx < 0 || idx >= n)
        fail(ErrorCode::kInvalidArgument,
             "triangle " + std::to_string(t) + " references vertex " + std::to_string(idx));
}

TriangleMesh TriangleMesh::box(const Eigen::Vector3d &size, const Eigen::Vector3d &center) {
  TriangleMesh mesh;
  const Eigen::Vector3d h = size / 2.0;
  for (int i = 0; i < 8; ++i)
    mesh.vertices.push_back(center + Eigen::Vector3d((i & 1) ? h.x() : -h.x(),
                                                     (i & 2) ? h.y() : -h.y(),
                                                     (i & 4) ? h.z() : -h.z()));
  // Two triangles per face, as quads (a, b, c, d) split along a–c.
  const int quads[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                           {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
  for (const auto &q : quads) {
    for (const std::array<int, 3> tri : {std::array<int, 3>{q[0], q[1], q[2]},
                                         std::array<int, 3>{q[0], q[2], q[3]}}) {
      const Eigen::Vector3d &a = mesh.vertices[static_cast<std::size_t>(tri[0])];
      const Eigen::Vector3d &b = mesh.vertices[static_cast<std::size_t>(tri[1])];
      const Eigen::Vector3d &c = mesh.vertices[static_cast<std::size_t>(tri[2])];
      const Eigen::Vector3d outward = (a + b + c) / 3.0 - center;
      if ((b - a).cross(c - a).dot(outward) < 0.0)
        mesh.triangles.push_back({tri[0], tri[2], tri[1]});
      else
        mesh.triangles.push_back(tri);
    }
  }
  return mesh;
}

InstanceMask DepthBuffer::coverage() const {
  InstanceMask mask(width(), height());
  for (std::size_t i = 0; i < depth_.size(); ++i)
    if (depth_[i] != kNoSurface) mask.set_index(i);
  return mask;
}

DepthImage DepthBuffer::to_depth_image(double depth_scale) const {
  DepthImage out(width(), height());
  for (std::size_t i = 0; i < depth_.size(); ++i) {
    if (depth_[i] == kNoSurface) continue;
    const double raw = std::round(depth_[i] / depth_scale);
    out[i] = static_cast<std::uint16_t>(std::clamp(raw, 1.0, 65535.0));
  }
  return out;
}

namespace {

// Projected triangle ready for pixel tests. Vertices are ordered so that the
// signed area is positive.
struct ScreenTriangle {
  Eigen::Vector2d p[3];
  double inv_z[3];
  double area;
  bool top_left[3];  // for edge i: p[(i+1)%3] → p[(i+2)%3]
  int u_min, u_max, v_min, v_max;
};

// Evaluates the edge function with endpoints in a canonical order so that the
// two triangles sharing an edge see exactly negated values.
double edge_function(const Eigen::Vector2d &a, const Eigen::Vector2d &b, double u, double v) {
  const bool swap = (b.x() < a.x()) || (b.x() == a.x() && b.y() < a.y());
  const Eigen::Vector2d &s = swap ? b : a;
  const Eigen::Vector2d &e = swap ? a : b;
  const double value = (e.x() - s.x()) * (v - s.y()) - (e.y() - s.y()) * (u - s.x());
  return swap ? -value : value;
}

int clamp_floor(double x, int lo, int hi) {
  if (!(x > lo)) return lo;
  if (!(x < hi)) return hi;
  return static_cast<int>(std::floor(x));
}

int clamp_ceil(double x, int lo, int hi) {
  if (!(x > lo)) return lo;
  if (!(x < hi)) return hi;
  return static_cast<int>(std::ceil(x));
}

void add_screen_triangle(const Eigen::Vector3d &a, const Eigen::Vector3d &b,
                         const Eigen::Vector3d &c, const CameraIntrinsics &k,
                         std::vector<ScreenTriangle> &out) {
  ScreenTriangle tri{};
  const Eigen::Vector3d *cam[3] = {&a, &b, &c};
  for (int i = 0; i < 3; ++i) {
    tri.p[i] = k.project(*cam[i]);
    tri.inv_z[i] = 1.0 / cam[i]->z();
  }
  double area = (tri.p[1] - tri.p[0]).x() * (tri.p[2] - tri.p[0]).y() -
                (tri.p[1] - tri.p[0]).y() * (tri.p[2] - tri.p[0]).x();
  if (!std::isfinite(area) || std::abs(area) < 1e-12) return;
  if (area < 0.0) {
    std::swap(tri.p[1], tri.p[2]);
    std::swap(tri.inv_z[1], tri.inv_z[2]);
  }
  // The pixel tests use the canonical edge function; its sign must agree.
  area = edge_function(tri.p[0], tri.p[1], tri.p[2].x(), tri.p[2].y());
  if (!(area > 0.0)) return;
  tri.area = area;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d d = tri.p[(i + 2) % 3] - tri.p[(i + 1) % 3];
    tri.top_left[i] = (d.y() == 0.0 && d.x() > 0.0) || d.y() < 0.0;
  }
  const double x_lo = std::min({tri.p[0].x(), tri.p[1].x(), tri.p[2].x()});
  const double x_hi = std::max({tri.p[0].x(), tri.p[1].x(), tri.p[2].x()});
  const double y_lo = std::min({tri.p[0].y(), tri.p[1].y(), tri.p[2].y()});
  const double y_hi = std::max({tri.p[0].y(), tri.p[1].y(), tri.p[2].y()});
  if (x_hi < 0.0 || y_hi < 0.0 || x_lo > k.width - 1 || y_lo > k.height - 1) return;
  tri.u_min = clamp_ceil(x_lo, 0, k.width - 1);
  tri.u_max = clamp_floor(x_hi, 0, k.width - 1);
  tri.v_min = clamp_ceil(y_lo, 0, k.height - 1);
  tri.v_max = clamp_floor(y_hi, 0, k.height - 1);
  if (tri.u_min > tri.u_max || tri.v_min > tri.v_max) return;
  out.push_back(tri);
}

// Sutherland–Hodgman against Z ≥ near, then fan triangulation.
void clip_and_project(const Eigen::Vector3d &a, const Eigen::Vector3d &b, const Eigen::Vector3d &c,
                      const CameraIntrinsics &k, std::vector<ScreenTriangle> &out) {
  const Eigen::Vector3d in[3] = {a, b, c};
  int inside = 0;
  for (const auto &p : in) inside += p.z() >= kNearPlaneMm;
  if (inside == 0) return;
  if (inside == 3) {
    add_screen_triangle(a, b, c, k, out);
    return;
  }
  Eigen::Vector3d poly[4];
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d &s = in[i];
    const Eigen::Vector3d &e = in[(i + 1) % 3];
    const bool s_in = s.z() >= kNearPlaneMm;
    const bool e_in = e.z() >= kNearPlaneMm;
    if (s_in) poly[n++] = s;
    if (s_in != e_in) {
      const double t = (kNearPlaneMm - s.z()) / (e.z() - s.z());
      Eigen::Vector3d x = s + t * (e - s);
      x.z() = kNearPlaneMm;
      poly[n++] = x;
    }
  }
  for (int i = 1; i + 1 < n; ++i) add_screen_triangle(poly[0], poly[i], poly[i + 1], k, out);
}

std::vector<ScreenTriangle> setup_triangles(const TriangleMesh &mesh, const Pose &pose,
                                            const CameraIntrinsics &k) {
  std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = pose * mesh.vertices[i];
  std::vector<ScreenTriangle> tris;
  tris.reserve(mesh.triangles.size());
  for (const auto &t : mesh.triangles)
    clip_and_project(cam[static_cast<std::size_t>(t[0])], cam[static_cast<std::size_t>(t[1])],
                     cam[static_cast<std::size_t>(t[2])], k, tris);
  return tris;
}

inline void shade_pixel(const ScreenTriangle &tri, int u, int v, double &depth) {
  const double x = u, y = v;
  double w[3];
  for (int i = 0; i < 3; ++i) {
    w[i] = edge_function(tri.p[(i + 1) % 3], tri.p[(i + 2) % 3], x, y);
    if (w[i] < 0.0 || (w[i] == 0.0 && !tri.top_left[i])) return;
  }
  const double sum = w[0] + w[1] + w[2];
  if (!(sum > 0.0)) return;
  const double inv_z = (w[0] * tri.inv_z[0] + w[1] * tri.inv_z[1] + w[2] * tri.inv_z[2]) / sum;
  if (!(inv_z > 0.0)) return;
  const double z = 1.0 / inv_z;
  if (z < depth) depth = z;
}

}  // namespace

DepthBuffer rasterize(const TriangleMesh &mesh, const Pose &pose, const CameraIntrinsics &k,
                      Execution exec) {
  k.validate();
  mesh.validate();
  DepthBuffer buffer(k.width, k.height);
  if (mesh.empty()) return buffer;
  const std::vector<ScreenTriangle> tris = setup_triangles(mesh, pose, k);

  if (exec == Execution::kSerial) {
    for (const auto &tri : tris)
      for (int v = tri.v_min; v <= tri.v_max; ++v)
        for (int u = tri.u_min; u <= tri.u_max; ++u) shade_pixel(tri, u, v, buffer.at(u, v));
    return buffer;
  }

  // Each row is owned by one thread; the per-pixel minimum does not depend on
  // triangle order, so the result matches the serial path bit for bit.
#pragma omp parallel for schedule(dynamic, 4)
  for (int v = 0; v < k.height; ++v) {
    for (const auto &tri : tris) {
      if (v < tri.v_min || v > tri.v_max) continue;
      for (int u = tri.u_min; u <= tri.u_max; ++u) shade_pixel(tri, u, v, buffer.at(u, v));
    }
  }
  return buffer;
}

CompositedMasks composite_visible_masks(const std::vector<std::pair<int, DepthBuffer>> &buffers) {
  CompositedMasks out;
  if (buffers.empty()) return out;
  const int width = buffers.front().second.width();
  const int height = buffers.front().second.height();
  for (const auto &[id, buf] : buffers)
    if (buf.width() != width || buf.height() != height)
      fail(ErrorCode::kDimensionMismatch, "depth buffers differ in size");

  for (const auto &[id, buf] : buffers) {
    InstanceMask amodal = buf.coverage();
    amodal.instance_id = id;
    InstanceMask visible(width, height);
    visible.instance_id = id;
    out.amodal.push_back(std::move(amodal));
    out.visible.push_back(std::move(visible));
  }
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  for (std::size_t p = 0; p < pixels; ++p) {
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < buffers.size(); ++i) {
      const double d = buffers[i].second[p];
      if (d == DepthBuffer::kNoSurface) continue;
      if (best < 0) {
        best = static_cast<std::ptrdiff_t>(i);
        continue;
      }
      const auto &cur = buffers[static_cast<std::size_t>(best)];
      if (d < cur.second[p] || (d == cur.second[p] && buffers[i].first < cur.first))
        best = static_cast<std::ptrdiff_t>(i);
    }
    if (best >= 0) out.visible[static_cast<std::size_t>(best)].set_index(p);
  }
  return out;
}

RgbImage blend_silhouette(const RgbImage &rgb, const InstanceMask &silhouette, Rgb tint,
                          double alpha) {
  if (!rgb.same_shape(silhouette.width(), silhouette.height()))
    fail(ErrorCode::kDimensionMismatch, "overlay silhouette differs from image size");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::kInvalidArgument, "alpha must be in [0, 1]");
  RgbImage out = rgb;
  const auto blend = [alpha](std::uint8_t c, std::uint8_t t) {
    const double value = (1.0 - alpha) * c + alpha * t;
    return static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
  };
  const int w = rgb.width(), h = rgb.height();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!silhouette.test(u, v)) continue;
      const bool boundary = (u > 0 && !silhouette.test(u - 1, v)) ||
                            (u + 1 < w && !silhouette.test(u + 1, v)) ||
                            (v > 0 && !silhouette.test(u, v - 1)) ||
                            (v + 1 < h && !silhouette.test(u, v + 1));
      Rgb &px = out.at(u, v);
      if (boundary) {
        px = tint;
      } else {
        px = Rgb{blend(px.r, tint.r), blend(px.g, tint.g), blend(px.b, tint.b)};
      }
    }
  }
  return out;
}

RgbImage render_overlay(const RgbImage &rgb, const TriangleMesh &mesh, const Pose &pose,
                        const CameraIntrinsics &k, Rgb tint, double alpha) {
  if (!rgb.same_shape(k.width, k.height))
    fail(ErrorCode::kDimensionMismatch, "rgb image size differs from camera intrinsics");
  return blend_silhouette(rgb, rasterize(mesh, pose, k).coverage(), tint, alpha);
}

}  // namespace dopose
