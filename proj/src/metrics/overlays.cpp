#include "samlab/metrics/overlays.hpp"

#include <algorithm>
#include <cmath>

namespace samlab {

namespace {

// Blue -> cyan -> yellow -> red ramp.
void heat_color(float v, float rgb[3]) {
  v = std::clamp(v, 0.f, 1.f);
  rgb[0] = std::clamp(1.5f * v - 0.25f, 0.f, 1.f);
  rgb[1] = std::clamp(1.f - std::abs(2.f * v - 1.f) * 0.8f, 0.f, 1.f);
  rgb[2] = std::clamp(1.f - 1.5f * v, 0.f, 1.f);
}

}  // namespace

void export_heat_overlay(const Image& image, const MaskingWeights& weights, const std::string& path) {
  check(weights.pixel_map.h == image.h && weights.pixel_map.w == image.w,
        "export_heat_overlay: weight map size != image size");
  constexpr float kAlpha = 0.45f;
  Image out(image.h, image.w, 3);
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x) {
      float rgb[3];
      heat_color(weights.pixel_map.at(y, x, 0), rgb);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = (1.f - kAlpha) * image.at(y, x, c) + kAlpha * rgb[c];
    }
  write_png_rgb8(path, out);
}

void export_partition_overlay(const Image& image, const TokenPartition& part, const PatchConfig& cfg,
                              const std::string& path) {
  check(image.h == cfg.image_h && image.w == cfg.image_w, "export_partition_overlay: image size != config");
  Image out = image;
  const int p = cfg.patch_size;
  auto paint = [&](int patch_idx, float level) {
    const int gy = patch_idx / cfg.grid_w();
    const int gx = patch_idx % cfg.grid_w();
    for (int py = 0; py < p; ++py)
      for (int px = 0; px < p; ++px)
        for (int c = 0; c < 3; ++c) out.at(gy * p + py, gx * p + px, c) = level;
  };
  for (int idx : part.mask) paint(idx, 0.55f);
  for (int idx : part.throw_away) paint(idx, 0.20f);
  write_png_rgb8(path, out);
}

void export_overlays(const Image& image, const MaskingWeights& weights, const TokenPartition& part,
                     const PatchConfig& cfg, const std::string& heat_path, const std::string& partition_path) {
  export_heat_overlay(image, weights, heat_path);
  export_partition_overlay(image, part, cfg, partition_path);
}

}  // namespace samlab
