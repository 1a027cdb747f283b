#include "samlab/masking/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace samlab {

SampleIndex sample_indices(const std::vector<double>& weights, SampleMode mode, Rng& rng) {
  const int n = static_cast<int>(weights.size());
  for (double w : weights) check(w >= 0.0, "sample_indices: negative weight");

  std::vector<std::pair<double, int>> keyed(n);
  if (mode == SampleMode::kDeterministic) {
    for (int i = 0; i < n; ++i) keyed[i] = {weights[i], i};
  } else {
    // Gumbel-top-k: key_i = log(w_i + eps) + G_i. A floor keeps zero weights
    // finite while preserving the ordering of positive ones.
    constexpr double kFloor = 1e-6;
    for (int i = 0; i < n; ++i) keyed[i] = {std::log(weights[i] + kFloor) + rng.gumbel(), i};
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  SampleIndex out;
  out.order.resize(n);
  for (int i = 0; i < n; ++i) out.order[i] = keyed[i].second;
  return out;
}

TokenPartition partition(const SampleIndex& order, const MaskingRatios& ratios, int num_patches) {
  check(static_cast<int>(order.order.size()) == num_patches, "partition: order length != N");
  check(ratios.mask_ratio >= 0.0 && ratios.throw_ratio >= 0.0, "partition: negative ratio");
  check(ratios.mask_ratio + ratios.throw_ratio <= 1.0, "partition: mask_ratio + throw_ratio > 1");

  const auto counts = partition_counts(num_patches, ratios);
  TokenPartition part;
  part.mask.assign(order.order.begin(), order.order.begin() + counts.masked);
  part.throw_away.assign(order.order.begin() + counts.masked, order.order.begin() + counts.masked + counts.thrown);
  part.vis.assign(order.order.begin() + counts.masked + counts.thrown, order.order.end());
  return part;
}

PartitionCounts partition_counts(int num_patches, const MaskingRatios& ratios) {
  PartitionCounts c;
  c.masked = static_cast<int>(std::floor(num_patches * ratios.mask_ratio));
  const int mask_plus_throw = static_cast<int>(std::floor(num_patches * (ratios.mask_ratio + ratios.throw_ratio)));
  c.thrown = mask_plus_throw - c.masked;
  c.visible = num_patches - mask_plus_throw;
  return c;
}

TokenPartition random_partition(int num_patches, const MaskingRatios& ratios, Rng& rng) {
  SampleIndex order;
  order.order.resize(num_patches);
  std::iota(order.order.begin(), order.order.end(), 0);
  rng.shuffle(order.order);
  return partition(order, ratios, num_patches);
}

TokenPartition full_visible_partition(int num_patches) {
  TokenPartition part;
  part.vis.resize(num_patches);
  std::iota(part.vis.begin(), part.vis.end(), 0);
  return part;
}

}  // namespace samlab
