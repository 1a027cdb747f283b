#pragma once

#include <string>
#include <vector>

namespace samlab {

// Channel-last float image, values nominally in [0,1].
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<float> data;  // h * w * c, row-major

  Image() = default;
  Image(int h_, int w_, int c_, float fill = 0.f) : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

  float at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
  float& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }

  size_t size() const { return data.size(); }
};

// Bilinear resampling with the align-corners=false convention:
// src = (dst + 0.5) * scale - 0.5, clamped to the source extent.
Image resize_bilinear(const Image& src, int out_h, int out_w);

Image crop(const Image& src, int x, int y, int w, int h);
Image hflip(const Image& src);

// PNG I/O (libpng). read_png always yields an 8-bit-derived RGB float image.
Image read_png(const std::string& path);
void write_png_rgb8(const std::string& path, const Image& img);
// Single-channel image written as 16-bit grayscale; values clamped to [0,1].
void write_png_gray16(const std::string& path, const Image& img);

}  // namespace samlab
