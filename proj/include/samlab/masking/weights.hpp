#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "samlab/data/augment.hpp"
#include "samlab/image.hpp"
#include "samlab/model/vit.hpp"

namespace samlab {

/// Per-image masking weight map cached at the canonical image resolution,
/// min-max normalized to [0,1].
struct MaskingWeights {
  Image pixel_map;  // single channel, canonical H x W
  int source_epoch = -1;
  std::string image_id;
};

/// Head-averaged class-token attention over the patch tokens. Per head, the
/// cls row is taken, its self-attention entry dropped, and the remaining N
/// values rescaled to sum 1 before heads are averaged; the mean row is then
/// min-max normalized to [0,1] (a constant row maps to all zeros).
/// The maps must come from a full-image pass (token count N+1).
std::vector<double> extract_masking_weights(const AttentionMaps& last_attention, int sample, int num_patches);

/// Identical pipeline; callers use it on models pre-trained with lambda = 0.
std::vector<double> attention_only_weights(const AttentionMaps& last_attention, int sample, int num_patches);

/// Reshape per-patch weights to the patch grid and bilinearly interpolate to
/// the canonical image size; values clamped to [0,1].
MaskingWeights weights_to_pixel_map(const std::vector<double>& patch_weights, const PatchConfig& cfg, int image_h,
                                    int image_w, const std::string& image_id, int epoch);

/// Replays the exact augmentation geometry onto the pixel map and mean-pools
/// each patch to one weight. The record's output size must match the model
/// input size.
std::vector<double> pixel_map_to_patch_weights(const MaskingWeights& weights, const AugmentationRecord& record,
                                               const PatchConfig& cfg);

/// Keyed by image id. Reads may be concurrent; refreshes happen in an
/// exclusive phase between epochs.
class WeightCache {
 public:
  void put(MaskingWeights w) { cache_[w.image_id] = std::move(w); }
  bool contains(const std::string& id) const { return cache_.count(id) > 0; }
  const MaskingWeights& get(const std::string& id) const;
  size_t size() const { return cache_.size(); }
  void clear() { cache_.clear(); }

 private:
  std::unordered_map<std::string, MaskingWeights> cache_;
};

}  // namespace samlab
