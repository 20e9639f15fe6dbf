#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dopose/errors.hpp"

namespace dopose {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb &, const Rgb &) = default;
};

// Row-major image with pixel (u, v) at column u, row v.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked(width) * checked(height)), fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T &at(int u, int v) { return data_[index(u, v)]; }
  const T &at(int u, int v) const { return data_[index(u, v)]; }
  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  std::vector<T> &data() noexcept { return data_; }
  const std::vector<T> &data() const noexcept { return data_; }

  bool same_shape(int width, int height) const noexcept {
    return width_ == width && height_ == height;
  }
  template <typename U>
  bool same_shape(const Image<U> &other) const noexcept {
    return same_shape(other.width(), other.height());
  }

  friend bool operator==(const Image &, const Image &) = default;

 private:
  static long long checked(int n) {
    if (n < 0) fail(ErrorCode::kInvalidArgument, "negative image dimension");
    return n;
  }
  std::size_t index(int u, int v) const noexcept {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Raw 16-bit depth; value 0 marks an invalid pixel.
using DepthImage = Image<std::uint16_t>;
using RgbImage = Image<Rgb>;
using GrayImage = Image<std::uint8_t>;

// PNG / image file I/O (OpenCV codecs underneath). Writers are atomic:
// data goes to a temporary sibling which is then renamed into place.
DepthImage read_depth(const std::filesystem::path &path);
RgbImage read_rgb(const std::filesystem::path &path);
GrayImage read_gray(const std::filesystem::path &path);
void write_depth(const std::filesystem::path &path, const DepthImage &depth);
void write_rgb(const std::filesystem::path &path, const RgbImage &rgb);
void write_gray(const std::filesystem::path &path, const GrayImage &gray);

std::vector<std::uint8_t> encode_png(const RgbImage &rgb);
std::vector<std::uint8_t> encode_png(const GrayImage &gray);
RgbImage decode_rgb_png(const std::vector<std::uint8_t> &bytes);

// Reads width/height from the file header without decoding pixels.
// Supports PNG directly and falls back to a full decode for other formats.
std::pair<int, int> image_dimensions(const std::filesystem::path &path);

}  // namespace dopose
