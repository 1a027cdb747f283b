#include "samlab/metrics/precision.hpp"

#include <algorithm>

namespace samlab {

nlohmann::json MaskPrecisionReport::to_json() const {
  return nlohmann::json{{"lesion_mask_rate", lesion_mask_rate},
                        {"background_mask_rate", background_mask_rate},
                        {"argmax_hit_rate", argmax_hit_rate},
                        {"images", images}};
}

std::vector<bool> lesion_patches(const Image& lesion_mask, const PatchConfig& cfg) {
  check(lesion_mask.h == cfg.image_h && lesion_mask.w == cfg.image_w, "lesion_patches: mask size != model input size");
  const int p = cfg.patch_size;
  std::vector<bool> out(cfg.num_patches(), false);
  for (int gy = 0; gy < cfg.grid_h(); ++gy) {
    for (int gx = 0; gx < cfg.grid_w(); ++gx) {
      int covered = 0;
      for (int py = 0; py < p; ++py)
        for (int px = 0; px < p; ++px)
          if (lesion_mask.at(gy * p + py, gx * p + px, 0) > 0.5f) ++covered;
      out[gy * cfg.grid_w() + gx] = covered * 10 >= 3 * p * p;  // >= 30%
    }
  }
  return out;
}

MaskPrecisionReport mask_precision(const std::vector<TokenPartition>& partitions,
                                   const std::vector<std::vector<double>>& patch_weights,
                                   const std::vector<const Image*>& lesion_masks, const PatchConfig& cfg) {
  check(partitions.size() == lesion_masks.size(), "mask_precision: partition/mask count mismatch");
  check(patch_weights.empty() || patch_weights.size() == partitions.size(),
        "mask_precision: weight/partition count mismatch");

  int64_t lesion_total = 0, lesion_masked = 0, background_total = 0, background_masked = 0;
  int argmax_hits = 0, argmax_images = 0;

  MaskPrecisionReport report;
  report.images = static_cast<int>(partitions.size());
  for (size_t i = 0; i < partitions.size(); ++i) {
    const auto lesion = lesion_patches(*lesion_masks[i], cfg);
    std::vector<bool> masked(cfg.num_patches(), false);
    for (int idx : partitions[i].mask) masked[idx] = true;

    for (int t = 0; t < cfg.num_patches(); ++t) {
      if (lesion[t]) {
        ++lesion_total;
        lesion_masked += masked[t] ? 1 : 0;
      } else {
        ++background_total;
        background_masked += masked[t] ? 1 : 0;
      }
    }

    if (!patch_weights.empty() && !patch_weights[i].empty()) {
      const auto& w = patch_weights[i];
      const int argmax = static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
      ++argmax_images;
      argmax_hits += lesion[argmax] ? 1 : 0;
    }
  }

  report.lesion_mask_rate = lesion_total > 0 ? static_cast<double>(lesion_masked) / lesion_total : 0.0;
  report.background_mask_rate = background_total > 0 ? static_cast<double>(background_masked) / background_total : 0.0;
  report.argmax_hit_rate = argmax_images > 0 ? static_cast<double>(argmax_hits) / argmax_images : 0.0;
  return report;
}

}  // namespace samlab
