#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "samlab/model/vit.hpp"

namespace samlab {

/// Analytical operation counts for one encoder-side forward pass.
/// Per block: attention 4 n d^2 + 2 n^2 d, MLP 8 n d^2 (matmul terms only);
/// the patch embedding and the classification head are counted once.
/// mac_ops selects the counting convention: 1 reports multiply-accumulates
/// (the convention matching common profiler tables), 2 counts each MAC as
/// two floating-point operations. Token-count ratios cancel the convention.
struct FlopsReport {
  int64_t encoder_flops = 0;
  int64_t decoder_flops = 0;
  int64_t head_flops = 0;
  int token_count = 0;
  std::map<std::string, int64_t> breakdown;

  int64_t total() const { return encoder_flops + decoder_flops + head_flops; }
  nlohmann::json to_json() const;
};

FlopsReport count_flops(const PatchConfig& cfg, int token_count, int mac_ops = 1);

/// Adds the pre-training decoder cost (decoder_tokens = visible + masked).
FlopsReport count_flops_with_decoder(const PatchConfig& cfg, int token_count, int decoder_tokens, int masked_tokens,
                                     int mac_ops = 1);

/// Encoder token count for a masked pass: N - floor(N (r+t)) + 1 (cls).
int sam_token_count(const PatchConfig& cfg, const MaskingRatios& ratios);

}  // namespace samlab
