#include "samlab/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "samlab/common.hpp"

namespace samlab {

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  check(src.h > 0 && src.w > 0, "resize_bilinear: empty source");
  Image out(out_h, out_w, src.c);
  const double sy = static_cast<double>(src.h) / out_h;
  const double sx = static_cast<double>(src.w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.h - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < src.c; ++ch) {
        const double top = (1.0 - wx) * src.at(y0, x0, ch) + wx * src.at(y0, x1, ch);
        const double bot = (1.0 - wx) * src.at(y1, x0, ch) + wx * src.at(y1, x1, ch);
        out.at(oy, ox, ch) = static_cast<float>((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

Image crop(const Image& src, int x, int y, int w, int h) {
  check(x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= src.w && y + h <= src.h,
        "crop: window outside image bounds");
  Image out(h, w, src.c);
  for (int oy = 0; oy < h; ++oy)
    for (int ox = 0; ox < w; ++ox)
      for (int ch = 0; ch < src.c; ++ch) out.at(oy, ox, ch) = src.at(y + oy, x + ox, ch);
  return out;
}

Image hflip(const Image& src) {
  Image out(src.h, src.w, src.c);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x)
      for (int ch = 0; ch < src.c; ++ch) out.at(y, x, ch) = src.at(y, src.w - 1 - x, ch);
  return out;
}

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

Image read_png(const std::string& path) {
  std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  check(fp != nullptr, "read_png: cannot open " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw Error("read_png: not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  check(png != nullptr, "read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("read_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("read_png: decode error in " + path);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  // Normalize anything to 8-bit RGB.
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  std::vector<png_byte> row(png_get_rowbytes(png, info));

  Image img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = row[x * 3 + ch] / 255.f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

namespace {

void write_png(const std::string& path, int w, int h, int color_type, int bit_depth,
               const std::vector<std::vector<png_byte>>& rows) {
  std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  check(fp != nullptr, "write_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  check(png != nullptr, "write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("write_png: encode error for " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& r : rows) png_write_row(png, const_cast<png_bytep>(r.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

png_byte to_u8(float v) {
  const float clamped = std::clamp(v, 0.f, 1.f);
  return static_cast<png_byte>(std::lround(clamped * 255.f));
}

}  // namespace

void write_png_rgb8(const std::string& path, const Image& img) {
  check(img.c == 3, "write_png_rgb8: expected 3 channels");
  std::vector<std::vector<png_byte>> rows(img.h, std::vector<png_byte>(static_cast<size_t>(img.w) * 3));
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < 3; ++ch) rows[y][x * 3 + ch] = to_u8(img.at(y, x, ch));
  write_png(path, img.w, img.h, PNG_COLOR_TYPE_RGB, 8, rows);
}

void write_png_gray16(const std::string& path, const Image& img) {
  check(img.c == 1, "write_png_gray16: expected 1 channel");
  std::vector<std::vector<png_byte>> rows(img.h, std::vector<png_byte>(static_cast<size_t>(img.w) * 2));
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const float clamped = std::clamp(img.at(y, x, 0), 0.f, 1.f);
      const auto v = static_cast<uint16_t>(std::lround(clamped * 65535.f));
      rows[y][x * 2] = static_cast<png_byte>(v >> 8);  // network byte order
      rows[y][x * 2 + 1] = static_cast<png_byte>(v & 0xff);
    }
  }
  write_png(path, img.w, img.h, PNG_COLOR_TYPE_GRAY, 16, rows);
}

}  // namespace samlab
