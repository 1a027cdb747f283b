#include "samlab/metrics/flops.hpp"

namespace samlab {

nlohmann::json FlopsReport::to_json() const {
  return nlohmann::json{{"encoder_flops", encoder_flops},
                        {"decoder_flops", decoder_flops},
                        {"head_flops", head_flops},
                        {"token_count", token_count},
                        {"total", total()},
                        {"breakdown", breakdown}};
}

FlopsReport count_flops(const PatchConfig& cfg, int token_count, int mac_ops) {
  check(mac_ops == 1 || mac_ops == 2, "count_flops: mac_ops must be 1 or 2");
  const int64_t n = token_count;
  const int64_t d = cfg.embed_dim;
  const int64_t m = mac_ops;

  FlopsReport report;
  report.token_count = token_count;

  const int64_t embed = m * static_cast<int64_t>(cfg.num_patches()) * cfg.patch_dim() * d;
  const int64_t attn_per_block = m * (4 * n * d * d + 2 * n * n * d);
  const int64_t mlp_per_block = m * (8 * n * d * d);
  const int64_t blocks = cfg.encoder_depth * (attn_per_block + mlp_per_block);
  const int64_t head = m * d * cfg.num_classes;

  report.breakdown["patch_embed"] = embed;
  report.breakdown["encoder_attention"] = cfg.encoder_depth * attn_per_block;
  report.breakdown["encoder_mlp"] = cfg.encoder_depth * mlp_per_block;
  report.breakdown["cls_head"] = head;
  report.encoder_flops = embed + blocks;
  report.head_flops = head;
  return report;
}

FlopsReport count_flops_with_decoder(const PatchConfig& cfg, int token_count, int decoder_tokens, int masked_tokens,
                                     int mac_ops) {
  FlopsReport report = count_flops(cfg, token_count, mac_ops);
  const int64_t nd = decoder_tokens;
  const int64_t dd = cfg.decoder_dim;
  const int64_t m = mac_ops;

  const int64_t dec_embed = m * static_cast<int64_t>(token_count - 1) * cfg.embed_dim * dd;
  const int64_t dec_blocks = cfg.decoder_depth * m * (4 * nd * dd * dd + 2 * nd * nd * dd + 8 * nd * dd * dd);
  const int64_t dec_pred = m * static_cast<int64_t>(masked_tokens) * dd * cfg.patch_dim();

  report.breakdown["decoder_embed"] = dec_embed;
  report.breakdown["decoder_blocks"] = dec_blocks;
  report.breakdown["decoder_pred"] = dec_pred;
  report.decoder_flops = dec_embed + dec_blocks + dec_pred;
  return report;
}

int sam_token_count(const PatchConfig& cfg, const MaskingRatios& ratios) {
  return partition_counts(cfg.num_patches(), ratios).visible + 1;
}

}  // namespace samlab
