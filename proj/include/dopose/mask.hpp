#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dopose/image.hpp"

namespace dopose {

// Axis-aligned box in pixels: (x, y) top-left, (w, h) extent.
// An empty region has box (0, 0, 0, 0).
struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const noexcept { return static_cast<long long>(w) * h; }
  friend bool operator==(const BoundingBox &, const BoundingBox &) = default;
};

// Binary pixel mask with optional detection confidence and instance id.
class InstanceMask {
 public:
  InstanceMask() = default;
  InstanceMask(int width, int height) : bits_(width, height, 0) {}
  explicit InstanceMask(GrayImage bits);

  int width() const noexcept { return bits_.width(); }
  int height() const noexcept { return bits_.height(); }

  bool test(int u, int v) const { return bits_.at(u, v) != 0; }
  void set(int u, int v, bool value = true) { bits_.at(u, v) = value ? 1 : 0; }
  bool test_index(std::size_t i) const { return bits_[i] != 0; }
  void set_index(std::size_t i, bool value = true) { bits_[i] = value ? 1 : 0; }

  // Sets every pixel in [u0, u1) × [v0, v1).
  void fill_rect(int u0, int v0, int u1, int v1);

  long long area() const;
  BoundingBox bbox() const;
  bool empty() const { return area() == 0; }

  const GrayImage &bits() const noexcept { return bits_; }

  // 0 / 255 image, the on-disk mask convention.
  GrayImage to_image() const;
  // Any nonzero pixel is inside.
  static InstanceMask from_image(const GrayImage &image);

  std::optional<double> confidence;
  std::optional<int> instance_id;

  // Pixel content only; confidence and id are ignored.
  bool same_pixels(const InstanceMask &other) const { return bits_ == other.bits_; }

 private:
  GrayImage bits_;
};

long long intersection_area(const InstanceMask &a, const InstanceMask &b);

/**
 * Run-length encoding in the COCO convention: column-major pixel order,
 * counts alternate background / foreground starting with background.
 */
struct RunLength {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RunLength &, const RunLength &) = default;
};

RunLength rle_encode(const InstanceMask &mask);
InstanceMask rle_decode(const RunLength &rle);

// Compact ASCII form of the counts used by COCO tooling (pycocotools).
std::string rle_counts_to_string(const std::vector<std::uint32_t> &counts);
std::vector<std::uint32_t> rle_counts_from_string(std::string_view text);

}  // namespace dopose
