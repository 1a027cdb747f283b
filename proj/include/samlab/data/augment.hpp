#pragma once

#include <utility>

#include "samlab/image.hpp"
#include "samlab/rng.hpp"

namespace samlab {

/// Exact geometric transform applied to one image: crop window in canonical
/// pixels, then bilinear resize to output_size, then optional horizontal
/// flip. Replaying the record reproduces the augmented image bit-exactly.
struct AugmentationRecord {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool flip = false;
  int out_h = 0;
  int out_w = 0;
};

struct AugmentPolicy {
  enum class Kind { kTrain, kEval };
  Kind kind = Kind::kTrain;
  int out_size = 64;
  double scale_min = 0.2;  // crop area fraction (random resized crop)
  double scale_max = 1.0;
  double hflip_prob = 0.5;
};

AugmentationRecord sample_augmentation(const Image& img, const AugmentPolicy& policy, Rng& rng);

Image apply_record(const Image& img, const AugmentationRecord& rec);

inline std::pair<Image, AugmentationRecord> augment(const Image& img, const AugmentPolicy& policy, Rng& rng) {
  const AugmentationRecord rec = sample_augmentation(img, policy, rng);
  return {apply_record(img, rec), rec};
}

}  // namespace samlab
