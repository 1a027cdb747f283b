#include "samlab/model/vit.hpp"

#include <algorithm>
#include <cmath>

namespace samlab {

void PatchConfig::validate() const {
  check(image_h > 0 && image_w > 0 && patch_size > 0, "config: nonpositive dimensions");
  check(image_h % patch_size == 0 && image_w % patch_size == 0,
        "config: image dimensions must be divisible by patch size");
  check(embed_dim % num_heads == 0, "config: embed_dim must be divisible by num_heads");
  check(embed_dim % 4 == 0, "config: embed_dim must be divisible by 4 for sincos positions");
  check(decoder_dim % decoder_heads == 0, "config: decoder_dim must be divisible by decoder_heads");
  check(decoder_dim % 4 == 0, "config: decoder_dim must be divisible by 4 for sincos positions");
  check(encoder_depth >= 0 && decoder_depth >= 0, "config: negative depth");
  check(num_classes >= 2, "config: need at least two classes");
}

PatchConfig vit_base_patch16_224(int num_classes) {
  PatchConfig cfg;
  cfg.image_h = cfg.image_w = 224;
  cfg.patch_size = 16;
  cfg.embed_dim = 768;
  cfg.num_heads = 12;
  cfg.encoder_depth = 12;
  cfg.decoder_dim = 512;
  cfg.decoder_depth = 8;
  cfg.decoder_heads = 16;
  cfg.num_classes = num_classes;
  return cfg;
}

PatchConfig synth_tiny(int num_classes) {
  PatchConfig cfg;
  cfg.num_classes = num_classes;
  return cfg;
}

Mat EncoderOutput::cls_rows() const {
  Mat c(batch, encodings.cols());
  for (int b = 0; b < batch; ++b) c.row(b) = encodings.row(static_cast<Eigen::Index>(b) * seq);
  return c;
}

MaskedAutoencoder::MaskedAutoencoder(const PatchConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);

  const int d = cfg_.embed_dim;
  const int dd = cfg_.decoder_dim;
  const int n = cfg_.num_patches();

  patch_proj_ = Linear("patch_embed", cfg_.patch_dim(), d, rng);
  cls_token_.init("cls_token", 1, d, /*wd=*/false);
  for (int j = 0; j < d; ++j) cls_token_.value(0, j) = rng.trunc_normal(0.02);
  pos_embed_ = sincos_position_embedding(cfg_.grid_h(), cfg_.grid_w(), d, /*with_cls_row=*/true);

  blocks_.reserve(cfg_.encoder_depth);
  for (int i = 0; i < cfg_.encoder_depth; ++i)
    blocks_.push_back(std::make_unique<TransformerBlock>("encoder.block" + std::to_string(i), d, cfg_.num_heads, rng));
  encoder_norm_ = LayerNorm("encoder.norm", d);
  head_ = Linear("head", d, cfg_.num_classes, rng);

  decoder_embed_ = Linear("decoder.embed", d, dd, rng);
  mask_token_.init("decoder.mask_token", 1, dd, /*wd=*/false);
  for (int j = 0; j < dd; ++j) mask_token_.value(0, j) = rng.trunc_normal(0.02);
  decoder_pos_ = sincos_position_embedding(cfg_.grid_h(), cfg_.grid_w(), dd, /*with_cls_row=*/false);
  decoder_blocks_.reserve(cfg_.decoder_depth);
  for (int i = 0; i < cfg_.decoder_depth; ++i)
    decoder_blocks_.push_back(
        std::make_unique<TransformerBlock>("decoder.block" + std::to_string(i), dd, cfg_.decoder_heads, rng));
  decoder_norm_ = LayerNorm("decoder.norm", dd);
  decoder_pred_ = Linear("decoder.pred", dd, cfg_.patch_dim(), rng);

  fc_norm_ = LayerNorm("fc_norm", d);
  ft_head_ = Linear("ft_head", d, cfg_.num_classes, rng);

  // layer ids drive the fine-tuning layer-wise lr decay
  patch_proj_.set_layer_id(0);
  cls_token_.layer_id = 0;
  for (int i = 0; i < cfg_.encoder_depth; ++i) blocks_[i]->set_layer_id(i + 1);
  const int top = cfg_.encoder_depth + 1;
  encoder_norm_.set_layer_id(top);
  head_.set_layer_id(top);
  fc_norm_.set_layer_id(top);
  ft_head_.set_layer_id(top);

  patch_proj_.register_into(params_);
  params_.add(&cls_token_);
  for (auto& b : blocks_) b->register_into(params_);
  encoder_norm_.register_into(params_);
  head_.register_into(params_);
  decoder_embed_.register_into(params_);
  params_.add(&mask_token_);
  for (auto& b : decoder_blocks_) b->register_into(params_);
  decoder_norm_.register_into(params_);
  decoder_pred_.register_into(params_);
  fc_norm_.register_into(params_);
  ft_head_.register_into(params_);

  (void)n;
}

std::vector<Param*> MaskedAutoencoder::pretrain_params() const {
  std::vector<Param*> out;
  for (auto* p : params_.all())
    if (p->name.rfind("fc_norm", 0) != 0 && p->name.rfind("ft_head", 0) != 0) out.push_back(p);
  return out;
}

std::vector<Param*> MaskedAutoencoder::finetune_params() const {
  std::vector<Param*> out;
  for (auto* p : params_.all())
    if (p->name.rfind("decoder.", 0) != 0 && p->name.rfind("head.", 0) != 0) out.push_back(p);
  return out;
}

void MaskedAutoencoder::reinit_finetune_head(uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < ft_head_.w.value.rows(); ++i)
    for (Eigen::Index j = 0; j < ft_head_.w.value.cols(); ++j) ft_head_.w.value(i, j) = rng.trunc_normal(0.02);
  ft_head_.b.value.setZero();
  fc_norm_.gamma.value.setOnes();
  fc_norm_.beta.value.setZero();
}

void MaskedAutoencoder::warm_start_finetune_head_from_pretrain_head() {
  ft_head_.w.value = head_.w.value;
  ft_head_.b.value = head_.b.value;
}

Mat MaskedAutoencoder::patchify(const ImageBatch& batch, const PatchConfig& cfg) {
  check(batch.batch() >= 1, "patchify: empty batch");
  const int p = cfg.patch_size;
  for (const Image& img : batch.images)
    check(img.h % p == 0 && img.w % p == 0, "patchify: image dimensions not divisible by patch size");

  const int gh = batch.images[0].h / p;
  const int gw = batch.images[0].w / p;
  const int n = gh * gw;
  const int pd = p * p * 3;
  Mat out(static_cast<Eigen::Index>(batch.batch()) * n, pd);
  for (int b = 0; b < batch.batch(); ++b) {
    const Image& img = batch.images[b];
    check(img.c == 3, "patchify: expected 3 channels");
    check(img.h / p == gh && img.w / p == gw, "patchify: inconsistent image sizes in batch");
    for (int gy = 0; gy < gh; ++gy) {
      for (int gx = 0; gx < gw; ++gx) {
        const Eigen::Index row = static_cast<Eigen::Index>(b) * n + gy * gw + gx;
        int col = 0;
        for (int py = 0; py < p; ++py)
          for (int px = 0; px < p; ++px)
            for (int ch = 0; ch < 3; ++ch) out(row, col++) = img.at(gy * p + py, gx * p + px, ch);
      }
    }
  }
  return out;
}

std::vector<Image> MaskedAutoencoder::unpatchify(const Mat& patches, const PatchConfig& cfg, int batch) {
  const int p = cfg.patch_size;
  const int gh = cfg.grid_h();
  const int gw = cfg.grid_w();
  const int n = gh * gw;
  check(patches.rows() == static_cast<Eigen::Index>(batch) * n && patches.cols() == cfg.patch_dim(),
        "unpatchify: shape mismatch");
  std::vector<Image> out;
  out.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    Image img(cfg.image_h, cfg.image_w, 3);
    for (int gy = 0; gy < gh; ++gy) {
      for (int gx = 0; gx < gw; ++gx) {
        const Eigen::Index row = static_cast<Eigen::Index>(b) * n + gy * gw + gx;
        int col = 0;
        for (int py = 0; py < p; ++py)
          for (int px = 0; px < p; ++px)
            for (int ch = 0; ch < 3; ++ch) img.at(gy * p + py, gx * p + px, ch) = static_cast<float>(patches(row, col++));
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

TokenSequence MaskedAutoencoder::embed(const Mat& patches, int batch) {
  const int n = cfg_.num_patches();
  check(patches.rows() == static_cast<Eigen::Index>(batch) * n && patches.cols() == cfg_.patch_dim(),
        "embed: patch tensor shape mismatch");
  const Mat projected = patch_proj_.forward(patches);

  TokenSequence seq;
  seq.batch = batch;
  seq.seq = n + 1;
  seq.tokens.resize(static_cast<Eigen::Index>(batch) * (n + 1), cfg_.embed_dim);
  for (int b = 0; b < batch; ++b) {
    seq.tokens.row(seq.row(b, 0)) = cls_token_.value.row(0) + pos_embed_.row(0);
    for (int t = 0; t < n; ++t)
      seq.tokens.row(seq.row(b, t + 1)) = projected.row(static_cast<Eigen::Index>(b) * n + t) + pos_embed_.row(t + 1);
  }
  return seq;
}

AppliedPartition apply_partition(const TokenSequence& full, const std::vector<TokenPartition>& parts) {
  check(static_cast<int>(parts.size()) == full.batch, "apply_partition: one partition per sample required");
  const int n = full.seq - 1;
  const int nv = static_cast<int>(parts[0].vis.size());
  const int nm = static_cast<int>(parts[0].mask.size());
  const auto d = full.tokens.cols();

  AppliedPartition out;
  out.vis_with_cls.batch = full.batch;
  out.vis_with_cls.seq = nv + 1;
  out.vis_with_cls.tokens.resize(static_cast<Eigen::Index>(full.batch) * (nv + 1), d);
  out.x_mask.resize(static_cast<Eigen::Index>(full.batch) * nm, d);

  for (int b = 0; b < full.batch; ++b) {
    const TokenPartition& part = parts[b];
    check(static_cast<int>(part.vis.size()) == nv && static_cast<int>(part.mask.size()) == nm,
          "apply_partition: inconsistent cardinalities in batch");
    check(part.total() == n, "apply_partition: partition built for a different N");
    out.vis_with_cls.tokens.row(out.vis_with_cls.row(b, 0)) = full.tokens.row(full.row(b, 0));
    for (int i = 0; i < nv; ++i) {
      const int idx = part.vis[i];
      check(idx >= 0 && idx < n, "apply_partition: index out of range");
      out.vis_with_cls.tokens.row(out.vis_with_cls.row(b, i + 1)) = full.tokens.row(full.row(b, idx + 1));
    }
    for (int j = 0; j < nm; ++j) {
      const int idx = part.mask[j];
      check(idx >= 0 && idx < n, "apply_partition: index out of range");
      out.x_mask.row(static_cast<Eigen::Index>(b) * nm + j) = full.tokens.row(full.row(b, idx + 1));
    }
  }
  return out;
}

TokenSequence MaskedAutoencoder::gather_visible(const TokenSequence& full,
                                                const std::vector<TokenPartition>& parts) const {
  return apply_partition(full, parts).vis_with_cls;
}

EncoderOutput MaskedAutoencoder::encode(const TokenSequence& tokens) {
  check(tokens.seq >= 1, "encode: empty sequence");
  EncoderOutput out;
  out.batch = tokens.batch;
  out.seq = tokens.seq;
  if (blocks_.empty()) {
    out.encodings = tokens.tokens;  // identity composition of zero blocks
    return out;
  }
  Mat x = tokens.tokens;
  for (auto& blk : blocks_) x = blk->forward(x, tokens.batch, tokens.seq);
  out.encodings = encoder_norm_.forward(x);

  const auto& attn = blocks_.back()->attn();
  out.last_attention.batch = tokens.batch;
  out.last_attention.heads = attn.heads();
  out.last_attention.seq = tokens.seq;
  out.last_attention.layer_index = static_cast<int>(blocks_.size()) - 1;
  out.last_attention.per_head = attn.attention();
  return out;
}

DecoderOutput MaskedAutoencoder::decode(const EncoderOutput& enc, const std::vector<TokenPartition>& parts) {
  check(static_cast<int>(parts.size()) == enc.batch, "decode: one partition per sample required");
  const int nv = static_cast<int>(parts[0].vis.size());
  const int nm = static_cast<int>(parts[0].mask.size());
  check(enc.seq == nv + 1, "decode: encoder output does not match partition visible count");

  DecoderOutput out;
  out.batch = enc.batch;
  out.n_mask = nm;
  if (nm == 0) {
    out.predicted_pixels = Mat(0, cfg_.patch_dim());
    return out;
  }

  for (const auto& part : parts) {
    std::vector<char> visible(cfg_.num_patches(), 0);
    for (int idx : part.vis) visible[idx] = 1;
    for (int idx : part.mask) check(!visible[idx], "decode: mask indices overlap visible indices");
  }

  const int dd = cfg_.decoder_dim;
  const int nd = nv + nm;

  // project visible patch encodings (cls excluded)
  Mat evis(static_cast<Eigen::Index>(enc.batch) * nv, cfg_.embed_dim);
  for (int b = 0; b < enc.batch; ++b)
    for (int i = 0; i < nv; ++i)
      evis.row(static_cast<Eigen::Index>(b) * nv + i) = enc.encodings.row(static_cast<Eigen::Index>(b) * enc.seq + 1 + i);
  const Mat dvis = decoder_embed_.forward(evis);

  Mat d0(static_cast<Eigen::Index>(enc.batch) * nd, dd);
  for (int b = 0; b < enc.batch; ++b) {
    const TokenPartition& part = parts[b];
    for (int i = 0; i < nv; ++i)
      d0.row(static_cast<Eigen::Index>(b) * nd + i) =
          dvis.row(static_cast<Eigen::Index>(b) * nv + i) + decoder_pos_.row(part.vis[i]);
    for (int j = 0; j < nm; ++j)
      d0.row(static_cast<Eigen::Index>(b) * nd + nv + j) = mask_token_.value.row(0) + decoder_pos_.row(part.mask[j]);
  }

  Mat x = std::move(d0);
  for (auto& blk : decoder_blocks_) x = blk->forward(x, enc.batch, nd);
  x = decoder_norm_.forward(x);

  Mat masked_rows(static_cast<Eigen::Index>(enc.batch) * nm, dd);
  for (int b = 0; b < enc.batch; ++b)
    for (int j = 0; j < nm; ++j)
      masked_rows.row(static_cast<Eigen::Index>(b) * nm + j) = x.row(static_cast<Eigen::Index>(b) * nd + nv + j);
  out.predicted_pixels = decoder_pred_.forward(masked_rows);
  return out;
}

Mat MaskedAutoencoder::classify_logits(const Mat& cls_encodings) { return head_.forward(cls_encodings); }

Mat MaskedAutoencoder::probabilities_from_logits(const Mat& logits) { return softmax_rows(logits); }

PretrainStepOutput MaskedAutoencoder::forward_pretrain(const Mat& patches, int batch,
                                                       const std::vector<TokenPartition>& parts,
                                                       const std::vector<int>& labels, const LossConfig& loss_cfg) {
  const int n = cfg_.num_patches();
  pre_cache_ = PretrainCache{};
  pre_cache_.batch = batch;
  pre_cache_.parts = parts;
  pre_cache_.labels = labels;
  pre_cache_.lambda = loss_cfg.lambda_cls;
  pre_cache_.n_vis = static_cast<int>(parts[0].vis.size());
  pre_cache_.n_mask = static_cast<int>(parts[0].mask.size());

  const TokenSequence full = embed(patches, batch);
  const TokenSequence xvis = gather_visible(full, parts);
  const EncoderOutput enc = encode(xvis);

  const Mat cls = enc.cls_rows();
  const Mat logits = head_.forward(cls);
  const ClsLoss cl = cls_loss_from_logits(logits, labels);

  const DecoderOutput dec = decode(enc, parts);

  const int nm = pre_cache_.n_mask;
  Mat targets(static_cast<Eigen::Index>(batch) * nm, cfg_.patch_dim());
  for (int b = 0; b < batch; ++b)
    for (int j = 0; j < nm; ++j)
      targets.row(static_cast<Eigen::Index>(b) * nm + j) = patches.row(static_cast<Eigen::Index>(b) * n + parts[b].mask[j]);
  if (loss_cfg.normalize_pixel_targets && nm > 0) targets = standardize_target_rows(targets);

  PretrainStepOutput out;
  out.l_con = recon_loss(dec.predicted_pixels, targets);
  out.l_cls = cl.value;
  out.l_total = total_loss(out.l_con, out.l_cls, loss_cfg);
  out.logits = logits;
  out.probabilities = cl.probabilities;

  pre_cache_.targets = targets;
  pre_cache_.predictions = dec.predicted_pixels;
  pre_cache_.probabilities = cl.probabilities;
  pre_cache_.entry_count = dec.predicted_pixels.size();
  return out;
}

void MaskedAutoencoder::backward_pretrain() {
  const int batch = pre_cache_.batch;
  const int nv = pre_cache_.n_vis;
  const int nm = pre_cache_.n_mask;
  const int nd = nv + nm;
  const int n = cfg_.num_patches();
  const int d = cfg_.embed_dim;

  Mat gevis;  // gradient w.r.t. visible patch encodings, via the decoder
  if (nm > 0) {
    const Mat gy = recon_loss_grad(pre_cache_.predictions, pre_cache_.targets);
    const Mat gmasked = decoder_pred_.backward(gy);
    Mat gnorm_out = Mat::Zero(static_cast<Eigen::Index>(batch) * nd, cfg_.decoder_dim);
    for (int b = 0; b < batch; ++b)
      for (int j = 0; j < nm; ++j)
        gnorm_out.row(static_cast<Eigen::Index>(b) * nd + nv + j) = gmasked.row(static_cast<Eigen::Index>(b) * nm + j);
    Mat gx = decoder_norm_.backward(gnorm_out);
    for (auto it = decoder_blocks_.rbegin(); it != decoder_blocks_.rend(); ++it) gx = (*it)->backward(gx);

    Mat gdvis(static_cast<Eigen::Index>(batch) * nv, cfg_.decoder_dim);
    for (int b = 0; b < batch; ++b) {
      for (int i = 0; i < nv; ++i)
        gdvis.row(static_cast<Eigen::Index>(b) * nv + i) = gx.row(static_cast<Eigen::Index>(b) * nd + i);
      for (int j = 0; j < nm; ++j)
        mask_token_.grad.row(0) += gx.row(static_cast<Eigen::Index>(b) * nd + nv + j);
    }
    gevis = decoder_embed_.backward(gdvis);
  }

  const Mat glogits = pre_cache_.lambda * cls_loss_grad(pre_cache_.probabilities, pre_cache_.labels);
  const Mat gcls = head_.backward(glogits);

  Mat genc = Mat::Zero(static_cast<Eigen::Index>(batch) * (nv + 1), d);
  for (int b = 0; b < batch; ++b) {
    genc.row(static_cast<Eigen::Index>(b) * (nv + 1)) = gcls.row(b);
    if (gevis.size() > 0)
      for (int i = 0; i < nv; ++i)
        genc.row(static_cast<Eigen::Index>(b) * (nv + 1) + 1 + i) += gevis.row(static_cast<Eigen::Index>(b) * nv + i);
  }

  Mat gx = blocks_.empty() ? genc : encoder_norm_.backward(genc);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) gx = (*it)->backward(gx);

  Mat gtokens = Mat::Zero(static_cast<Eigen::Index>(batch) * n, d);
  for (int b = 0; b < batch; ++b) {
    cls_token_.grad.row(0) += gx.row(static_cast<Eigen::Index>(b) * (nv + 1));
    for (int i = 0; i < nv; ++i)
      gtokens.row(static_cast<Eigen::Index>(b) * n + pre_cache_.parts[b].vis[i]) =
          gx.row(static_cast<Eigen::Index>(b) * (nv + 1) + 1 + i);
  }
  patch_proj_.backward(gtokens);
}

Mat MaskedAutoencoder::forward_classify(const Mat& patches, int batch, const std::vector<TokenPartition>& parts,
                                        bool global_pool) {
  cls_cache_ = ClassifyCache{};
  cls_cache_.batch = batch;
  cls_cache_.global_pool = global_pool;
  cls_cache_.full_pass = parts.empty();

  const TokenSequence full = embed(patches, batch);
  TokenSequence x;
  if (parts.empty()) {
    x = full;
  } else {
    cls_cache_.parts = parts;
    x = gather_visible(full, parts);
  }
  cls_cache_.n_vis = x.seq - 1;

  const EncoderOutput enc = encode(x);
  Mat feature(batch, cfg_.embed_dim);
  if (global_pool) {
    for (int b = 0; b < batch; ++b) {
      feature.row(b).setZero();
      for (int t = 1; t < enc.seq; ++t) feature.row(b) += enc.encodings.row(static_cast<Eigen::Index>(b) * enc.seq + t);
      feature.row(b) /= static_cast<double>(enc.seq - 1);
    }
  } else {
    feature = enc.cls_rows();
  }
  return ft_head_.forward(fc_norm_.forward(feature));
}

void MaskedAutoencoder::backward_classify(const Mat& glogits) {
  const int batch = cls_cache_.batch;
  const int nv = cls_cache_.n_vis;
  const int n = cfg_.num_patches();
  const int d = cfg_.embed_dim;

  const Mat gfeature = fc_norm_.backward(ft_head_.backward(glogits));

  Mat genc = Mat::Zero(static_cast<Eigen::Index>(batch) * (nv + 1), d);
  for (int b = 0; b < batch; ++b) {
    if (cls_cache_.global_pool) {
      const Mat share = gfeature.row(b) / static_cast<double>(nv);
      for (int t = 1; t <= nv; ++t) genc.row(static_cast<Eigen::Index>(b) * (nv + 1) + t) = share;
    } else {
      genc.row(static_cast<Eigen::Index>(b) * (nv + 1)) = gfeature.row(b);
    }
  }

  Mat gx = blocks_.empty() ? genc : encoder_norm_.backward(genc);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) gx = (*it)->backward(gx);

  Mat gtokens = Mat::Zero(static_cast<Eigen::Index>(batch) * n, d);
  for (int b = 0; b < batch; ++b) {
    cls_token_.grad.row(0) += gx.row(static_cast<Eigen::Index>(b) * (nv + 1));
    for (int i = 0; i < nv; ++i) {
      const int idx = cls_cache_.full_pass ? i : cls_cache_.parts[b].vis[i];
      gtokens.row(static_cast<Eigen::Index>(b) * n + idx) = gx.row(static_cast<Eigen::Index>(b) * (nv + 1) + 1 + i);
    }
  }
  patch_proj_.backward(gtokens);
}

EncoderOutput MaskedAutoencoder::forward_all_tokens(const Mat& patches, int batch) {
  return encode(embed(patches, batch));
}

}  // namespace samlab
