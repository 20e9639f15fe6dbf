#include <array>
#include <cmath>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "dopose/fileio.hpp"
#include "dopose/image.hpp"

namespace dopose {

namespace fs = std::filesystem;

namespace {

cv::Mat read_any(const fs::path &path, int flags) {
  if (!fs::exists(path)) fail(ErrorCode::kMissingImage, "image not found: " + path.string());
  cv::Mat mat = cv::imread(path.string(), flags);
  if (mat.empty()) fail(ErrorCode::kMalformedFile, "cannot decode image " + path.string());
  return mat;
}

void write_encoded(const fs::path &path, const cv::Mat &mat) {
  std::vector<std::uint8_t> bytes;
  const std::string ext = path.has_extension() ? path.extension().string() : ".png";
  if (!cv::imencode(ext, mat, bytes))
    fail(ErrorCode::kIoFailure, "cannot encode image " + path.string());
  write_file_atomic(path, std::string_view(reinterpret_cast<const char *>(bytes.data()),
                                           bytes.size()));
}

cv::Mat to_mat(const RgbImage &rgb) {
  cv::Mat mat(rgb.height(), rgb.width(), CV_8UC3);
  for (int v = 0; v < rgb.height(); ++v) {
    auto *row = mat.ptr<cv::Vec3b>(v);
    for (int u = 0; u < rgb.width(); ++u) {
      const Rgb &p = rgb.at(u, v);
      row[u] = cv::Vec3b(p.b, p.g, p.r);
    }
  }
  return mat;
}

cv::Mat to_mat(const GrayImage &gray) {
  cv::Mat mat(gray.height(), gray.width(), CV_8UC1);
  for (int v = 0; v < gray.height(); ++v)
    std::copy_n(&gray.at(0, v), gray.width(), mat.ptr<std::uint8_t>(v));
  return mat;
}

RgbImage from_mat_rgb(const cv::Mat &mat) {
  RgbImage out(mat.cols, mat.rows);
  cv::Mat bgr;
  if (mat.channels() == 1) {
    cv::Mat gray8;
    mat.convertTo(gray8, CV_8U);
    cv::Mat channels[] = {gray8, gray8, gray8};
    cv::merge(channels, 3, bgr);
  } else if (mat.channels() == 4) {
    cv::Mat channels[4];
    cv::split(mat, channels);
    cv::merge(channels, 3, bgr);
  } else {
    bgr = mat;
  }
  if (bgr.depth() != CV_8U) bgr.convertTo(bgr, CV_8U, 1.0 / 257.0);
  for (int v = 0; v < bgr.rows; ++v) {
    const auto *row = bgr.ptr<cv::Vec3b>(v);
    for (int u = 0; u < bgr.cols; ++u) out.at(u, v) = Rgb{row[u][2], row[u][1], row[u][0]};
  }
  return out;
}

std::uint32_t read_be32(const unsigned char *p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

}  // namespace

DepthImage read_depth(const fs::path &path) {
  cv::Mat mat = read_any(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  DepthImage out(mat.cols, mat.rows);
  if (mat.type() == CV_16UC1) {
    for (int v = 0; v < mat.rows; ++v)
      std::copy_n(mat.ptr<std::uint16_t>(v), mat.cols, &out.at(0, v));
  } else if (mat.type() == CV_32FC1 || mat.type() == CV_64FC1) {
    cv::Mat f64;
    mat.convertTo(f64, CV_64F);
    for (int v = 0; v < mat.rows; ++v) {
      const double *row = f64.ptr<double>(v);
      for (int u = 0; u < mat.cols; ++u) {
        const double d = row[u];
        // Non-finite and out-of-range values collapse to the invalid marker.
        out.at(u, v) = (std::isfinite(d) && d > 0.0 && d < 65535.5)
                           ? static_cast<std::uint16_t>(std::lround(d))
                           : std::uint16_t{0};
      }
    }
  } else if (mat.type() == CV_8UC1) {
    for (int v = 0; v < mat.rows; ++v)
      for (int u = 0; u < mat.cols; ++u) out.at(u, v) = mat.at<std::uint8_t>(v, u);
  } else {
    fail(ErrorCode::kMalformedFile, "unsupported depth image type in " + path.string());
  }
  return out;
}

RgbImage read_rgb(const fs::path &path) {
  return from_mat_rgb(read_any(path, cv::IMREAD_UNCHANGED));
}

GrayImage read_gray(const fs::path &path) {
  cv::Mat mat = read_any(path, cv::IMREAD_GRAYSCALE);
  GrayImage out(mat.cols, mat.rows);
  for (int v = 0; v < mat.rows; ++v) std::copy_n(mat.ptr<std::uint8_t>(v), mat.cols, &out.at(0, v));
  return out;
}

void write_depth(const fs::path &path, const DepthImage &depth) {
  cv::Mat mat(depth.height(), depth.width(), CV_16UC1);
  for (int v = 0; v < depth.height(); ++v)
    std::copy_n(&depth.at(0, v), depth.width(), mat.ptr<std::uint16_t>(v));
  write_encoded(path, mat);
}

void write_rgb(const fs::path &path, const RgbImage &rgb) { write_encoded(path, to_mat(rgb)); }

void write_gray(const fs::path &path, const GrayImage &gray) { write_encoded(path, to_mat(gray)); }

std::vector<std::uint8_t> encode_png(const RgbImage &rgb) {
  std::vector<std::uint8_t> bytes;
  cv::imencode(".png", to_mat(rgb), bytes);
  return bytes;
}

std::vector<std::uint8_t> encode_png(const GrayImage &gray) {
  std::vector<std::uint8_t> bytes;
  cv::imencode(".png", to_mat(gray), bytes);
  return bytes;
}

RgbImage decode_rgb_png(const std::vector<std::uint8_t> &bytes) {
  cv::Mat mat = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
  if (mat.empty()) fail(ErrorCode::kMalformedFile, "cannot decode PNG bytes");
  return from_mat_rgb(mat);
}

std::pair<int, int> image_dimensions(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingImage, "image not found: " + path.string());
  std::array<unsigned char, 24> header{};
  in.read(reinterpret_cast<char *>(header.data()), header.size());
  static constexpr std::array<unsigned char, 8> kPngSignature = {0x89, 'P', 'N', 'G',
                                                                 '\r', '\n', 0x1a, '\n'};
  if (in.gcount() == 24 && std::equal(kPngSignature.begin(), kPngSignature.end(), header.begin()) &&
      std::equal(header.begin() + 12, header.begin() + 16, "IHDR")) {
    return {static_cast<int>(read_be32(&header[16])), static_cast<int>(read_be32(&header[20]))};
  }
  cv::Mat mat = read_any(path, cv::IMREAD_UNCHANGED);
  return {mat.cols, mat.rows};
}

}  // namespace dopose
