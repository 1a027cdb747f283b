#include "samlab/masking/weights.hpp"

#include <algorithm>
#include <cmath>

namespace samlab {

std::vector<double> extract_masking_weights(const AttentionMaps& attn, int sample, int num_patches) {
  check(!attn.empty(), "extract_masking_weights: no attention maps captured");
  check(attn.seq == num_patches + 1,
        "extract_masking_weights: attention token count != N+1 (weights need a full-image pass)");
  check(sample >= 0 && sample < attn.batch, "extract_masking_weights: sample out of range");

  std::vector<double> mean(num_patches, 0.0);
  for (int h = 0; h < attn.heads; ++h) {
    const Mat& a = attn.map(sample, h);
    double sum = 0.0;
    for (int j = 0; j < num_patches; ++j) sum += a(0, j + 1);
    const double scale = sum > 0.0 ? 1.0 / sum : 0.0;
    for (int j = 0; j < num_patches; ++j) mean[j] += a(0, j + 1) * scale;
  }
  for (double& v : mean) v /= attn.heads;

  const auto [lo_it, hi_it] = std::minmax_element(mean.begin(), mean.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo < 1e-12) {
    std::fill(mean.begin(), mean.end(), 0.0);
  } else {
    for (double& v : mean) v = (v - lo) / (hi - lo);
  }
  return mean;
}

std::vector<double> attention_only_weights(const AttentionMaps& attn, int sample, int num_patches) {
  return extract_masking_weights(attn, sample, num_patches);
}

MaskingWeights weights_to_pixel_map(const std::vector<double>& patch_weights, const PatchConfig& cfg, int image_h,
                                    int image_w, const std::string& image_id, int epoch) {
  check(static_cast<int>(patch_weights.size()) == cfg.num_patches(),
        "weights_to_pixel_map: weight count != num_patches");
  Image grid(cfg.grid_h(), cfg.grid_w(), 1);
  for (int gy = 0; gy < cfg.grid_h(); ++gy)
    for (int gx = 0; gx < cfg.grid_w(); ++gx)
      grid.at(gy, gx, 0) = static_cast<float>(patch_weights[gy * cfg.grid_w() + gx]);

  MaskingWeights out;
  out.pixel_map = (grid.h == image_h && grid.w == image_w) ? grid : resize_bilinear(grid, image_h, image_w);
  for (float& v : out.pixel_map.data) v = std::clamp(v, 0.f, 1.f);
  out.image_id = image_id;
  out.source_epoch = epoch;
  return out;
}

std::vector<double> pixel_map_to_patch_weights(const MaskingWeights& weights, const AugmentationRecord& record,
                                               const PatchConfig& cfg) {
  check(record.out_h == cfg.image_h && record.out_w == cfg.image_w,
        "pixel_map_to_patch_weights: record output size != model input size");
  const Image view = apply_record(weights.pixel_map, record);

  const int p = cfg.patch_size;
  std::vector<double> out(cfg.num_patches(), 0.0);
  for (int gy = 0; gy < cfg.grid_h(); ++gy) {
    for (int gx = 0; gx < cfg.grid_w(); ++gx) {
      double acc = 0.0;
      for (int py = 0; py < p; ++py)
        for (int px = 0; px < p; ++px) acc += view.at(gy * p + py, gx * p + px, 0);
      out[gy * cfg.grid_w() + gx] = acc / (p * p);
    }
  }
  return out;
}

const MaskingWeights& WeightCache::get(const std::string& id) const {
  auto it = cache_.find(id);
  check(it != cache_.end(), "weight cache: no masking weights for image id " + id);
  return it->second;
}

}  // namespace samlab
