#pragma once

#include <string>

#include "samlab/image.hpp"
#include "samlab/masking/partition.hpp"
#include "samlab/masking/weights.hpp"
#include "samlab/model/vit.hpp"

namespace samlab {

/// Weight-map heatmap alpha-blended over the image.
void export_heat_overlay(const Image& image, const MaskingWeights& weights, const std::string& path);

/// Image with masked patches grayed at one level and thrown patches at a
/// darker one; visible patches pass through untouched.
void export_partition_overlay(const Image& image, const TokenPartition& part, const PatchConfig& cfg,
                              const std::string& path);

void export_overlays(const Image& image, const MaskingWeights& weights, const TokenPartition& part,
                     const PatchConfig& cfg, const std::string& heat_path, const std::string& partition_path);

}  // namespace samlab
