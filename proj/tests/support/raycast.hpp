#pragma once

#include "dopose/renderer.hpp"

namespace dopose::testing {

// Per-pixel Möller–Trumbore ray cast through every pixel center; nearest
// hit with Z ≥ the near plane. Independent of the rasterizer.
DepthBuffer raycast(const TriangleMesh &mesh, const Pose &pose, const CameraIntrinsics &k);

struct BufferAgreement {
  long long pixels = 0;
  long long coverage_mismatch = 0;
  long long depth_mismatch = 0;  // both covered, |Δ| > tolerance
  double max_depth_error = 0.0;  // over pixels covered in both
};

BufferAgreement compare_buffers(const DepthBuffer &a, const DepthBuffer &b, double tolerance);

// Cube A: side 100 centered at (0, 0, 600). Cube B: x ∈ [0, 100],
// y ∈ [−50, 50], z ∈ [400, 500], in front of the right half of A.
struct TwoCubeScene {
  CameraIntrinsics k;
  TriangleMesh cube_a, cube_b;
};
TwoCubeScene two_cube_scene();

}  // namespace dopose::testing
