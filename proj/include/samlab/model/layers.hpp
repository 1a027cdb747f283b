#pragma once

#include <string>
#include <vector>

#include "samlab/common.hpp"
#include "samlab/model/params.hpp"
#include "samlab/rng.hpp"

namespace samlab {

/// y = x W^T + b with rows as samples/tokens. W stored out x in.
/// register_into must be called once the object has reached its final
/// address (parameters are referenced by pointer from the registry).
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng, bool bias = true);

  void register_into(ParamRegistry& reg);

  Mat forward(const Mat& x);
  Mat backward(const Mat& gy);
  // Forward without caching, for gradient-free passes.
  Mat apply(const Mat& x) const;

  void set_layer_id(int id);

  Param w;  // out x in
  Param b;  // 1 x out (empty if bias disabled)
  bool has_bias() const { return b.value.size() > 0; }

 private:
  Mat x_cache_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);

  void register_into(ParamRegistry& reg);

  Mat forward(const Mat& x);
  Mat backward(const Mat& gy);
  Mat apply(const Mat& x) const;

  void set_layer_id(int id);

  Param gamma;  // 1 x d
  Param beta;   // 1 x d

 private:
  static constexpr double kEps = 1e-6;
  Mat xhat_cache_;
  Vec inv_std_cache_;
};

// Exact (erf) GELU.
class Gelu {
 public:
  Mat forward(const Mat& x);
  Mat backward(const Mat& gy) const;
  static Mat apply(const Mat& x);

 private:
  Mat x_cache_;
};

/// Standard multi-head self-attention over one batch of equal-length
/// sequences. x is (batch*seq) x dim; softmax(q k^T / sqrt(d_head)) per head
/// is kept and can be inspected after a forward pass.
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(const std::string& name, int dim, int heads, Rng& rng);

  void register_into(ParamRegistry& reg);

  Mat forward(const Mat& x, int batch, int seq);
  Mat backward(const Mat& gy);

  int heads() const { return heads_; }
  // attention()[b * heads + i] is the seq x seq softmax map of head i, sample b.
  const std::vector<Mat>& attention() const { return attn_; }

  void set_layer_id(int id);

  Linear wq, wk, wv, wo;

 private:
  int dim_ = 0;
  int heads_ = 0;
  int batch_ = 0;
  int seq_ = 0;
  Mat q_, k_, v_, heads_out_;
  std::vector<Mat> attn_;
};

/// Pre-norm transformer block: x + attn(ln1(x)), then y + mlp(ln2(y)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, int dim, int heads, Rng& rng);

  void register_into(ParamRegistry& reg);

  Mat forward(const Mat& x, int batch, int seq);
  Mat backward(const Mat& gy);

  const MultiHeadSelfAttention& attn() const { return attn_; }

  void set_layer_id(int id);

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadSelfAttention attn_;
  Linear fc1_, fc2_;
  Gelu act_;
};

/// Fixed 2-D sine-cosine positional table, one row per grid cell in raster
/// order; an all-zero row is prepended for the class token when requested.
/// dim must be divisible by 4.
Mat sincos_position_embedding(int grid_h, int grid_w, int dim, bool with_cls_row);

// Row-wise softmax (stable).
Mat softmax_rows(const Mat& x);

}  // namespace samlab
