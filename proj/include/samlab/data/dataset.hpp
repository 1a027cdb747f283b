#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "samlab/image.hpp"

namespace samlab {

struct LesionSample {
  Image image;        // H x W x 3 in [0,1]
  int label = 0;      // determined by the lesion shape family
  Image lesion_mask;  // H x W x 1, binary {0,1}
  std::string image_id;
};

/// In-memory labeled image collection. Read-only after construction.
class Dataset {
 public:
  std::vector<LesionSample> samples;
  std::vector<size_t> train_indices;
  std::vector<size_t> val_indices;
  int num_classes = 0;
  std::array<double, 3> channel_mean{0.0, 0.0, 0.0};
  std::array<double, 3> channel_std{1.0, 1.0, 1.0};

  size_t size() const { return samples.size(); }
  bool has_lesion_masks() const;

  Image normalized(const Image& img) const;

  void compute_stats();
  /// Deterministic split: ids ordered by seeded hash, first round(frac*n)
  /// become the training set.
  void split(double train_fraction, uint64_t seed);
};

/// Lesion shape families; the class label encodes the family.
/// 0 ellipse, 1 crescent, 2 speckled, 3 ring, 4 bar, 5 cross, 6 twin, 7 box.
Dataset generate_synthetic_lesion_dataset(int n_samples, int n_classes, int image_size, uint64_t seed);

/// Directory-per-class ingestion (PNG files). image_id is the path relative
/// to the root; the train/val split is a seeded-hash split.
Dataset load_image_folder(const std::string& path, double train_fraction = 0.8, uint64_t split_seed = 0);

/// Synthetic-set persistence: images/ and masks/ as PNG plus manifest.json.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_synthetic_dataset(const std::string& dir, double train_fraction = 0.8, uint64_t split_seed = 0);

uint64_t stable_hash(const std::string& s, uint64_t seed);

}  // namespace samlab
