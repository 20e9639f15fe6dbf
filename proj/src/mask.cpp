#include "dopose/mask.hpp"

#include <algorithm>
#include <numeric>

namespace dopose {

InstanceMask::InstanceMask(GrayImage bits) : bits_(std::move(bits)) {
  for (auto &b : bits_.data()) b = b ? 1 : 0;
}

void InstanceMask::fill_rect(int u0, int v0, int u1, int v1) {
  u0 = std::max(u0, 0);
  v0 = std::max(v0, 0);
  u1 = std::min(u1, width());
  v1 = std::min(v1, height());
  for (int v = v0; v < v1; ++v)
    for (int u = u0; u < u1; ++u) bits_.at(u, v) = 1;
}

long long InstanceMask::area() const {
  return std::accumulate(bits_.data().begin(), bits_.data().end(), 0LL);
}

BoundingBox InstanceMask::bbox() const {
  int u_min = width(), v_min = height(), u_max = -1, v_max = -1;
  for (int v = 0; v < height(); ++v) {
    for (int u = 0; u < width(); ++u) {
      if (!bits_.at(u, v)) continue;
      u_min = std::min(u_min, u);
      u_max = std::max(u_max, u);
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
  }
  if (u_max < 0) return {};
  return {u_min, v_min, u_max - u_min + 1, v_max - v_min + 1};
}

GrayImage InstanceMask::to_image() const {
  GrayImage out(width(), height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bits_[i] ? 255 : 0;
  return out;
}

InstanceMask InstanceMask::from_image(const GrayImage &image) { return InstanceMask(image); }

long long intersection_area(const InstanceMask &a, const InstanceMask &b) {
  if (a.width() != b.width() || a.height() != b.height())
    fail(ErrorCode::kDimensionMismatch, "masks differ in size");
  const auto &da = a.bits().data();
  const auto &db = b.bits().data();
  long long n = 0;
  for (std::size_t i = 0; i < da.size(); ++i) n += (da[i] & db[i]);
  return n;
}

RunLength rle_encode(const InstanceMask &mask) {
  RunLength rle{mask.height(), mask.width(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int u = 0; u < mask.width(); ++u) {
    for (int v = 0; v < mask.height(); ++v) {
      const std::uint8_t bit = mask.test(u, v) ? 1 : 0;
      if (bit != current) {
        rle.counts.push_back(run);
        run = 0;
        current = bit;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

InstanceMask rle_decode(const RunLength &rle) {
  InstanceMask mask(rle.width, rle.height);
  const std::size_t total = static_cast<std::size_t>(rle.width) * static_cast<std::size_t>(rle.height);
  std::size_t pos = 0;
  bool value = false;
  for (std::uint32_t count : rle.counts) {
    if (pos + count > total) fail(ErrorCode::kMalformedFile, "RLE counts exceed mask size");
    if (value) {
      for (std::size_t i = pos; i < pos + count; ++i) {
        const auto u = static_cast<int>(i / static_cast<std::size_t>(rle.height));
        const auto v = static_cast<int>(i % static_cast<std::size_t>(rle.height));
        mask.set(u, v);
      }
    }
    pos += count;
    value = !value;
  }
  if (pos != total) fail(ErrorCode::kMalformedFile, "RLE counts do not cover the mask");
  return mask;
}

// Each count is stored as the difference to the count two positions back
// (from the third on), in little-endian 5-bit groups offset by 48, bit 0x20
// marking continuation and bit 0x10 of the last group carrying the sign.
std::string rle_counts_to_string(const std::vector<std::uint32_t> &counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    long long x = counts[i];
    if (i > 2) x -= static_cast<long long>(counts[i - 2]);
    bool more = true;
    while (more) {
      long long c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      out.push_back(static_cast<char>(c + 48));
    }
  }
  return out;
}

std::vector<std::uint32_t> rle_counts_from_string(std::string_view text) {
  std::vector<std::uint32_t> counts;
  std::size_t p = 0;
  while (p < text.size()) {
    long long x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= text.size()) fail(ErrorCode::kMalformedFile, "truncated RLE string");
      const long long c = static_cast<long long>(text[p]) - 48;
      if (c < 0 || c > 63) fail(ErrorCode::kMalformedFile, "invalid RLE character");
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += static_cast<long long>(counts[counts.size() - 2]);
    if (x < 0) fail(ErrorCode::kMalformedFile, "negative RLE count");
    counts.push_back(static_cast<std::uint32_t>(x));
  }
  return counts;
}

}  // namespace dopose
