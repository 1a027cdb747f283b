#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "samlab/common.hpp"
#include "samlab/image.hpp"
#include "samlab/masking/partition.hpp"
#include "samlab/model/layers.hpp"
#include "samlab/model/params.hpp"
#include "samlab/rng.hpp"
#include "samlab/train/losses.hpp"

namespace samlab {

struct PatchConfig {
  int image_h = 64;
  int image_w = 64;
  int patch_size = 8;
  int embed_dim = 64;
  int num_heads = 4;
  int encoder_depth = 4;
  int decoder_dim = 32;
  int decoder_depth = 2;
  int decoder_heads = 4;
  int num_classes = 4;

  int grid_h() const { return image_h / patch_size; }
  int grid_w() const { return image_w / patch_size; }
  int num_patches() const { return grid_h() * grid_w(); }
  int patch_dim() const { return patch_size * patch_size * 3; }
  void validate() const;
};

PatchConfig vit_base_patch16_224(int num_classes = 5);
PatchConfig synth_tiny(int num_classes = 4);

struct ImageBatch {
  std::vector<Image> images;
  std::vector<int> labels;
  int batch() const { return static_cast<int>(images.size()); }
};

/// Embedded tokens, one (cls + patches) sequence per sample: row b*seq is the
/// class token of sample b, patch tokens follow in raster order.
struct TokenSequence {
  Mat tokens;  // (batch * seq) x dim
  int batch = 0;
  int seq = 0;

  Eigen::Index row(int b, int t) const { return static_cast<Eigen::Index>(b) * seq + t; }
};

/// Per-head softmax maps of one attention layer.
struct AttentionMaps {
  std::vector<Mat> per_head;  // indexed b * heads + h, each seq x seq
  int batch = 0;
  int heads = 0;
  int seq = 0;
  int layer_index = -1;

  bool empty() const { return per_head.empty(); }
  const Mat& map(int b, int h) const { return per_head[static_cast<size_t>(b) * heads + h]; }
};

struct EncoderOutput {
  Mat encodings;  // (batch * seq) x dim, cls at row b*seq
  int batch = 0;
  int seq = 0;
  AttentionMaps last_attention;

  Mat cls_rows() const;
};

struct DecoderOutput {
  Mat predicted_pixels;  // (batch * n_mask) x (p*p*3)
  int batch = 0;
  int n_mask = 0;
};

struct AppliedPartition {
  TokenSequence vis_with_cls;
  Mat x_mask;  // (batch * n_mask) x dim, rows in mask-list order
};

/// Gathers visible rows (class token always kept at position 0). All
/// partitions in the batch must share the same cardinalities.
AppliedPartition apply_partition(const TokenSequence& full, const std::vector<TokenPartition>& parts);

struct PretrainStepOutput {
  double l_con = 0.0;
  double l_cls = 0.0;
  double l_total = 0.0;
  Mat logits;  // batch x K
  Mat probabilities;
};

/// Masked-autoencoder ViT with a class-token classification head for
/// pre-training and a pooled head for fine-tuning. Single-threaded; forward
/// passes cache activations consumed by the matching backward call.
class MaskedAutoencoder {
 public:
  MaskedAutoencoder(const PatchConfig& cfg, uint64_t seed);

  const PatchConfig& config() const { return cfg_; }

  // Lossless raster rearrangement, one row per patch: [py][px][channel].
  static Mat patchify(const ImageBatch& batch, const PatchConfig& cfg);
  static std::vector<Image> unpatchify(const Mat& patches, const PatchConfig& cfg, int batch);

  /// Linear projection + class token + fixed sine-cosine positions.
  TokenSequence embed(const Mat& patches, int batch);

  /// Runs all encoder blocks (plus final norm when depth > 0); the returned
  /// attention maps come from the last block.
  EncoderOutput encode(const TokenSequence& tokens);

  /// Reconstructs masked patches from visible encodings. Thrown positions
  /// get neither a mask token nor a prediction; the class token is excluded.
  DecoderOutput decode(const EncoderOutput& enc, const std::vector<TokenPartition>& parts);

  /// Pre-training classification head over the class-token encoding.
  Mat classify_logits(const Mat& cls_encodings);
  static Mat probabilities_from_logits(const Mat& logits);

  // -- composite training passes ------------------------------------------

  PretrainStepOutput forward_pretrain(const Mat& patches, int batch, const std::vector<TokenPartition>& parts,
                                      const std::vector<int>& labels, const LossConfig& loss_cfg);
  void backward_pretrain();

  /// Classification pass for fine-tuning / evaluation. Empty `parts` means a
  /// full-token pass. With global_pool the feature is the mean of the non-cls
  /// outputs, else the cls encoding; both go through fc_norm + head.
  Mat forward_classify(const Mat& patches, int batch, const std::vector<TokenPartition>& parts, bool global_pool);
  void backward_classify(const Mat& glogits);

  /// Full-token evaluation forward used for masking-weight extraction.
  EncoderOutput forward_all_tokens(const Mat& patches, int batch);

  // -- parameters -----------------------------------------------------------

  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }
  std::vector<Param*> pretrain_params() const;
  std::vector<Param*> finetune_params() const;
  int finetune_layer_count() const { return cfg_.encoder_depth + 1; }

  void reinit_finetune_head(uint64_t seed);
  void warm_start_finetune_head_from_pretrain_head();

  const Mat& positional_embedding() const { return pos_embed_; }

 private:
  TokenSequence gather_visible(const TokenSequence& full, const std::vector<TokenPartition>& parts) const;

  PatchConfig cfg_;
  ParamRegistry params_;

  Linear patch_proj_;
  Param cls_token_;  // 1 x d
  Mat pos_embed_;    // (N+1) x d, fixed

  std::vector<std::unique_ptr<TransformerBlock>> blocks_;
  LayerNorm encoder_norm_;
  Linear head_;  // pre-training classification head (cls feature)

  Linear decoder_embed_;
  Param mask_token_;  // 1 x decoder_dim
  Mat decoder_pos_;   // N x decoder_dim, fixed
  std::vector<std::unique_ptr<TransformerBlock>> decoder_blocks_;
  LayerNorm decoder_norm_;
  Linear decoder_pred_;

  LayerNorm fc_norm_;  // fine-tuning feature norm
  Linear ft_head_;     // fine-tuning classification head

  // caches for composite backward passes
  struct PretrainCache {
    int batch = 0;
    int n_vis = 0;
    int n_mask = 0;
    std::vector<TokenPartition> parts;
    std::vector<int> labels;
    Mat targets;        // standardized targets G
    Mat predictions;    // Y
    Mat probabilities;  // batch x K
    double lambda = 0.0;
    Eigen::Index entry_count = 0;
  } pre_cache_;

  struct ClassifyCache {
    int batch = 0;
    int n_vis = 0;  // patch tokens fed to the encoder
    std::vector<TokenPartition> parts;
    bool global_pool = true;
    bool full_pass = false;
  } cls_cache_;
};

}  // namespace samlab
