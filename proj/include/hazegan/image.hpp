#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace hazegan {

// Planar-free RGB image, row-major interleaved, channel values in [0,1].
struct Image {
  int h = 0, w = 0;
  std::vector<float> px;  // h*w*3

  Image() = default;
  Image(int h_, int w_, float fill = 0.f) : h(h_), w(w_), px(size_t(h_) * w_ * 3, fill) {}

  float& at(int y, int x, int c) { return px[(size_t(y) * w + x) * 3 + c]; }
  float at(int y, int x, int c) const { return px[(size_t(y) * w + x) * 3 + c]; }
  size_t npix() const { return size_t(h) * w; }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w; }
};

// Single-channel float map (depth, transmission, luminance, ...).
struct FloatMap {
  int h = 0, w = 0;
  std::vector<float> v;

  FloatMap() = default;
  FloatMap(int h_, int w_, float fill = 0.f) : h(h_), w(w_), v(size_t(h_) * w_, fill) {}

  float& at(int y, int x) { return v[size_t(y) * w + x]; }
  float at(int y, int x) const { return v[size_t(y) * w + x]; }
};

// ITU-R BT.601 luma.
FloatMap luminance(const Image& img);

// 8-bit quantization used at file boundaries and by the saturation metric.
inline uint8_t quantize8(float v) {
  float x = v < 0.f ? 0.f : v > 1.f ? 1.f : v;
  return uint8_t(x * 255.f + 0.5f);
}

// Decode an image file to RGB [0,1]. Grayscale/alpha inputs are converted to
// 3 channels with a diagnostic appended when `diagnostics` is given.
Image read_image(const std::string& path, std::vector<std::string>* diagnostics = nullptr);

// Encode to 8-bit RGB; format chosen from the extension (.png/.jpg).
void write_image(const Image& img, const std::string& path);

// Bilinear resize.
Image resize_bilinear(const Image& img, int out_h, int out_w);

Image clamp01(Image img);

}  // namespace hazegan
