#pragma once

#include <cstdint>
#include <vector>

#include "samlab/common.hpp"
#include "samlab/rng.hpp"

namespace samlab {

struct MaskingRatios {
  double mask_ratio = 0.45;
  double throw_ratio = 0.30;
};

/// Permutation of the patch indices 0..N-1, highest-priority first.
struct SampleIndex {
  std::vector<int> order;
};

/// Disjoint cover of the patch indices. The class token is handled outside
/// the partition (it is always visible) and never appears in these lists.
struct TokenPartition {
  std::vector<int> mask;
  std::vector<int> throw_away;
  std::vector<int> vis;

  int total() const { return static_cast<int>(mask.size() + throw_away.size() + vis.size()); }
};

enum class SampleMode { kStochastic, kDeterministic };

/// Ranks patch indices by weight. Deterministic mode is a stable descending
/// sort (ties by ascending index). Stochastic mode is Gumbel-top-k weighted
/// sampling without replacement over log(w + 1e-6).
SampleIndex sample_indices(const std::vector<double>& weights, SampleMode mode, Rng& rng);

/// Slices a ranked index into mask / throw / vis with truncating bounds:
/// mask = J[0 : floor(N r)], throw = J[floor(N r) : floor(N (r+t))].
TokenPartition partition(const SampleIndex& order, const MaskingRatios& ratios, int num_patches);

/// Baseline: partition of a uniformly random permutation.
TokenPartition random_partition(int num_patches, const MaskingRatios& ratios, Rng& rng);

/// Cardinalities implied by (N, r, t); shared by both training phases.
struct PartitionCounts {
  int masked = 0;
  int thrown = 0;
  int visible = 0;
};
PartitionCounts partition_counts(int num_patches, const MaskingRatios& ratios);

/// Full-visible partition (r = t = 0) in index order.
TokenPartition full_visible_partition(int num_patches);

}  // namespace samlab
