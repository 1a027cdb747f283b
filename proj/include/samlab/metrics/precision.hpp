#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "samlab/image.hpp"
#include "samlab/masking/partition.hpp"
#include "samlab/model/vit.hpp"

namespace samlab {

/// How well partitions hit ground-truth lesions. A patch counts as lesion
/// when at least 30% of its pixels are lesion pixels.
struct MaskPrecisionReport {
  double lesion_mask_rate = 0.0;      // lesion patches that were masked
  double background_mask_rate = 0.0;  // background patches that were masked
  double argmax_hit_rate = 0.0;       // images whose top-weight patch is a lesion patch
  int images = 0;

  nlohmann::json to_json() const;
};

/// Marks the lesion patches of one mask (>= 30% pixel overlap).
std::vector<bool> lesion_patches(const Image& lesion_mask, const PatchConfig& cfg);

/// patch_weights may be empty; argmax_hit_rate is then reported as 0 over 0
/// images. One partition (and weight vector, when given) per lesion mask.
MaskPrecisionReport mask_precision(const std::vector<TokenPartition>& partitions,
                                   const std::vector<std::vector<double>>& patch_weights,
                                   const std::vector<const Image*>& lesion_masks, const PatchConfig& cfg);

}  // namespace samlab
