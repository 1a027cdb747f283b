#include "samlab/data/augment.hpp"

#include <algorithm>
#include <cmath>

#include "samlab/common.hpp"

namespace samlab {

AugmentationRecord sample_augmentation(const Image& img, const AugmentPolicy& policy, Rng& rng) {
  AugmentationRecord rec;
  rec.out_h = rec.out_w = policy.out_size;

  if (policy.kind == AugmentPolicy::Kind::kEval) {
    // resize-short-side + center crop, expressed as one crop window
    const int side = std::min(img.h, img.w);
    rec.x = (img.w - side) / 2;
    rec.y = (img.h - side) / 2;
    rec.w = rec.h = side;
    rec.flip = false;
    return rec;
  }

  const double area = static_cast<double>(img.h) * img.w;
  const double log_ratio_lo = std::log(3.0 / 4.0);
  const double log_ratio_hi = std::log(4.0 / 3.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(policy.scale_min, policy.scale_max);
    const double ratio = std::exp(rng.uniform(log_ratio_lo, log_ratio_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w < 1 || h < 1 || w > img.w || h > img.h) continue;
    rec.x = rng.uniform_int(img.w - w + 1);
    rec.y = rng.uniform_int(img.h - h + 1);
    rec.w = w;
    rec.h = h;
    rec.flip = rng.uniform() < policy.hflip_prob;
    return rec;
  }
  // fallback: center crop of the short side
  const int side = std::min(img.h, img.w);
  rec.x = (img.w - side) / 2;
  rec.y = (img.h - side) / 2;
  rec.w = rec.h = side;
  rec.flip = rng.uniform() < policy.hflip_prob;
  return rec;
}

Image apply_record(const Image& img, const AugmentationRecord& rec) {
  check(rec.w > 0 && rec.h > 0 && rec.out_h > 0 && rec.out_w > 0, "apply_record: empty window");
  Image out = crop(img, rec.x, rec.y, rec.w, rec.h);
  if (out.h != rec.out_h || out.w != rec.out_w) out = resize_bilinear(out, rec.out_h, rec.out_w);
  if (rec.flip) out = hflip(out);
  return out;
}

}  // namespace samlab
