#pragma once

// Test-only reference implementation of plain masked-autoencoder
// pre-training (random masking, no classification loss). Written
// independently of the library: per-sample math on column-major Eigen
// matrices, own layer/optimizer code. Used as the oracle for the
// baseline-equivalence acceptance criterion; masks, batch order and initial
// parameter values are injected so only the model/optimizer math is shared
// by construction with nothing else.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace refmae {

using M = Eigen::MatrixXd;
using V = Eigen::VectorXd;

struct Tensor {
  M val, grad, m, v;
  bool wd = false;

  void init(int rows, int cols, bool weight_decay) {
    val = M::Zero(rows, cols);
    grad = M::Zero(rows, cols);
    m = M::Zero(rows, cols);
    v = M::Zero(rows, cols);
    wd = weight_decay;
  }
};

struct Config {
  int image = 32;
  int patch = 8;
  int dim = 16;
  int heads = 2;
  int depth = 2;
  int dec_dim = 8;
  int dec_heads = 2;
  int dec_depth = 1;

  int grid() const { return image / patch; }
  int tokens() const { return grid() * grid(); }
  int patch_dim() const { return patch * patch * 3; }
};

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return cdf + x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

struct BlockState {
  M ln1_in, ln1_out, attn_in;  // caches
  std::vector<M> att;          // per head, n x n
  M q, k, v, ctx;
  M ln2_in, ln2_out, h1;       // mlp caches
};

struct Block {
  Tensor n1g, n1b, wq, bq, wk, bk, wv, bv, wo, bo, n2g, n2b, w1, b1, w2, b2;
  int dim, heads;

  void init(int d, int h) {
    dim = d;
    heads = h;
    n1g.init(d, 1, false);
    n1b.init(d, 1, false);
    wq.init(d, d, true);
    bq.init(d, 1, false);
    wk.init(d, d, true);
    bk.init(d, 1, false);
    wv.init(d, d, true);
    bv.init(d, 1, false);
    wo.init(d, d, true);
    bo.init(d, 1, false);
    n2g.init(d, 1, false);
    n2b.init(d, 1, false);
    w1.init(4 * d, d, true);
    b1.init(4 * d, 1, false);
    w2.init(d, 4 * d, true);
    b2.init(d, 1, false);
  }
};

namespace detail {

constexpr double kLnEps = 1e-6;

inline M layer_norm(const M& x, const Tensor& g, const Tensor& b) {
  M out(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    out.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + kLnEps)) * g.val.col(0).transpose().array() +
                 b.val.col(0).transpose().array();
  }
  return out;
}

inline M layer_norm_back(const M& x, const M& gout, Tensor& g, Tensor& b) {
  M gx(x.rows(), x.cols());
  const int d = static_cast<int>(x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    const Eigen::ArrayXd xhat = (x.row(r).transpose().array() - mean) * inv;
    const Eigen::ArrayXd go = gout.row(r).transpose().array();
    g.grad.col(0).array() += go * xhat;
    b.grad.col(0).array() += go;
    const Eigen::ArrayXd gxhat = go * g.val.col(0).array();
    const double s1 = gxhat.mean();
    const double s2 = (gxhat * xhat).mean();
    gx.row(r) = (inv * (gxhat - s1 - xhat * s2)).transpose();
  }
  return gx;
}

inline M linear(const M& x, const Tensor& w, const Tensor& b) {
  M out = x * w.val.transpose();
  out.rowwise() += b.val.col(0).transpose();
  return out;
}

inline M linear_back(const M& x, const M& gout, Tensor& w, Tensor& b) {
  w.grad += gout.transpose() * x;
  b.grad.col(0) += gout.colwise().sum().transpose();
  return gout * w.val;
}

inline void softmax_rows_inplace(M& s) {
  for (int r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

}  // namespace detail

inline M block_forward(Block& blk, const M& x, BlockState& st) {
  const int n = static_cast<int>(x.rows());
  const int dh = blk.dim / blk.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  st.ln1_in = x;
  st.ln1_out = detail::layer_norm(x, blk.n1g, blk.n1b);
  st.q = detail::linear(st.ln1_out, blk.wq, blk.bq);
  st.k = detail::linear(st.ln1_out, blk.wk, blk.bk);
  st.v = detail::linear(st.ln1_out, blk.wv, blk.bv);
  st.att.assign(blk.heads, M());
  st.ctx = M(n, blk.dim);
  for (int h = 0; h < blk.heads; ++h) {
    M scores = st.q.middleCols(h * dh, dh) * st.k.middleCols(h * dh, dh).transpose() * scale;
    detail::softmax_rows_inplace(scores);
    st.ctx.middleCols(h * dh, dh) = scores * st.v.middleCols(h * dh, dh);
    st.att[h] = std::move(scores);
  }
  M y = x + detail::linear(st.ctx, blk.wo, blk.bo);

  st.ln2_in = y;
  st.ln2_out = detail::layer_norm(y, blk.n2g, blk.n2b);
  st.h1 = detail::linear(st.ln2_out, blk.w1, blk.b1);
  M h1g = st.h1.unaryExpr([](double v) { return gelu(v); });
  return y + detail::linear(h1g, blk.w2, blk.b2);
}

inline M block_backward(Block& blk, const M& gout, BlockState& st) {
  const int dh = blk.dim / blk.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // mlp branch
  M h1g = st.h1.unaryExpr([](double v) { return gelu(v); });
  M gh1g = detail::linear_back(h1g, gout, blk.w2, blk.b2);
  M gh1 = gh1g.cwiseProduct(st.h1.unaryExpr([](double v) { return gelu_grad(v); }));
  M gln2 = detail::linear_back(st.ln2_out, gh1, blk.w1, blk.b1);
  M gy = gout + detail::layer_norm_back(st.ln2_in, gln2, blk.n2g, blk.n2b);

  // attention branch
  M gctx = detail::linear_back(st.ctx, gy, blk.wo, blk.bo);
  M gq(st.q.rows(), blk.dim), gk(st.k.rows(), blk.dim), gv(st.v.rows(), blk.dim);
  for (int h = 0; h < blk.heads; ++h) {
    const M& a = st.att[h];
    const M gctx_h = gctx.middleCols(h * dh, dh);
    gv.middleCols(h * dh, dh) = a.transpose() * gctx_h;
    M ga = gctx_h * st.v.middleCols(h * dh, dh).transpose();
    M gs(a.rows(), a.cols());
    for (int r = 0; r < a.rows(); ++r) {
      const double dot = (ga.row(r).array() * a.row(r).array()).sum();
      gs.row(r) = a.row(r).array() * (ga.row(r).array() - dot);
    }
    gq.middleCols(h * dh, dh) = gs * st.k.middleCols(h * dh, dh) * scale;
    gk.middleCols(h * dh, dh) = gs.transpose() * st.q.middleCols(h * dh, dh) * scale;
  }
  M gln1 = detail::linear_back(st.ln1_out, gq, blk.wq, blk.bq);
  gln1 += detail::linear_back(st.ln1_out, gk, blk.wk, blk.bk);
  gln1 += detail::linear_back(st.ln1_out, gv, blk.wv, blk.bv);
  return gy + detail::layer_norm_back(st.ln1_in, gln1, blk.n1g, blk.n1b);
}

class Model {
 public:
  explicit Model(const Config& cfg) : cfg_(cfg) {
    embed_w_.init(cfg.dim, cfg.patch_dim(), true);
    embed_b_.init(cfg.dim, 1, false);
    cls_.init(cfg.dim, 1, false);
    blocks_.resize(cfg.depth);
    for (auto& b : blocks_) b.init(cfg.dim, cfg.heads);
    norm_g_.init(cfg.dim, 1, false);
    norm_b_.init(cfg.dim, 1, false);
    dec_w_.init(cfg.dec_dim, cfg.dim, true);
    dec_b_.init(cfg.dec_dim, 1, false);
    mask_tok_.init(cfg.dec_dim, 1, false);
    dec_blocks_.resize(cfg.dec_depth);
    for (auto& b : dec_blocks_) b.init(cfg.dec_dim, cfg.dec_heads);
    dec_norm_g_.init(cfg.dec_dim, 1, false);
    dec_norm_b_.init(cfg.dec_dim, 1, false);
    pred_w_.init(cfg.patch_dim(), cfg.dec_dim, true);
    pred_b_.init(cfg.patch_dim(), 1, false);

    pos_ = sincos_table(cfg.grid(), cfg.dim, true);
    dec_pos_ = sincos_table(cfg.grid(), cfg.dec_dim, false);
  }

  // hierarchical-name -> tensor view for init injection
  std::map<std::string, Tensor*> named() {
    std::map<std::string, Tensor*> out{
        {"patch_embed.weight", &embed_w_}, {"patch_embed.bias", &embed_b_},
        {"cls_token", &cls_},              {"encoder.norm.weight", &norm_g_},
        {"encoder.norm.bias", &norm_b_},   {"decoder.embed.weight", &dec_w_},
        {"decoder.embed.bias", &dec_b_},   {"decoder.mask_token", &mask_tok_},
        {"decoder.norm.weight", &dec_norm_g_}, {"decoder.norm.bias", &dec_norm_b_},
        {"decoder.pred.weight", &pred_w_}, {"decoder.pred.bias", &pred_b_}};
    auto add_block = [&out](const std::string& prefix, Block& b) {
      out[prefix + ".norm1.weight"] = &b.n1g;
      out[prefix + ".norm1.bias"] = &b.n1b;
      out[prefix + ".attn.wq.weight"] = &b.wq;
      out[prefix + ".attn.wq.bias"] = &b.bq;
      out[prefix + ".attn.wk.weight"] = &b.wk;
      out[prefix + ".attn.wk.bias"] = &b.bk;
      out[prefix + ".attn.wv.weight"] = &b.wv;
      out[prefix + ".attn.wv.bias"] = &b.bv;
      out[prefix + ".attn.wo.weight"] = &b.wo;
      out[prefix + ".attn.wo.bias"] = &b.bo;
      out[prefix + ".norm2.weight"] = &b.n2g;
      out[prefix + ".norm2.bias"] = &b.n2b;
      out[prefix + ".mlp.fc1.weight"] = &b.w1;
      out[prefix + ".mlp.fc1.bias"] = &b.b1;
      out[prefix + ".mlp.fc2.weight"] = &b.w2;
      out[prefix + ".mlp.fc2.bias"] = &b.b2;
    };
    for (size_t i = 0; i < blocks_.size(); ++i) add_block("encoder.block" + std::to_string(i), blocks_[i]);
    for (size_t i = 0; i < dec_blocks_.size(); ++i) add_block("decoder.block" + std::to_string(i), dec_blocks_[i]);
    return out;
  }

  struct Sample {
    std::vector<double> pixels;  // image h*w*3, [0,1], already normalized
    std::vector<int> mask, vis;
  };

  // One batch: forward, loss, backward, AdamW step. Returns mean L_con.
  double train_step(const std::vector<Sample>& batch, double lr) {
    for (auto& [name, t] : named()) {
      (void)name;
      t->grad.setZero();
    }
    const double loss = forward_backward(batch);
    adam_step(lr);
    return loss;
  }

  double loss_only(const std::vector<Sample>& batch) {
    double total = 0.0;
    for (const auto& s : batch) total += sample_loss(s, nullptr);
    return total / batch.size();
  }

 private:
  static M sincos_table(int grid, int dim, bool with_cls) {
    const int quarter = dim / 4;
    M t = M::Zero(grid * grid + (with_cls ? 1 : 0), dim);
    const int off = with_cls ? 1 : 0;
    for (int ry = 0; ry < grid; ++ry)
      for (int cx = 0; cx < grid; ++cx)
        for (int q = 0; q < quarter; ++q) {
          const double om = std::pow(10000.0, -static_cast<double>(q) / quarter);
          const int row = off + ry * grid + cx;
          t(row, q) = std::sin(ry * om);
          t(row, quarter + q) = std::cos(ry * om);
          t(row, 2 * quarter + q) = std::sin(cx * om);
          t(row, 3 * quarter + q) = std::cos(cx * om);
        }
    return t;
  }

  M extract_patches(const std::vector<double>& pixels) const {
    const int g = cfg_.grid(), p = cfg_.patch, w = cfg_.image;
    M out(cfg_.tokens(), cfg_.patch_dim());
    for (int gy = 0; gy < g; ++gy)
      for (int gx = 0; gx < g; ++gx) {
        int col = 0;
        for (int py = 0; py < p; ++py)
          for (int px = 0; px < p; ++px)
            for (int c = 0; c < 3; ++c)
              out(gy * g + gx, col++) = pixels[((gy * p + py) * w + (gx * p + px)) * 3 + c];
      }
    return out;
  }

  struct Caches {
    M patches, seq_in;
    std::vector<BlockState> enc;
    M enc_out_in;  // before final norm
    M evis, d0;
    std::vector<BlockState> dec;
    M dec_norm_in, masked_rows, pred, target;
  };

  // loss for one sample; fills caches when given
  double sample_loss(const Sample& s, Caches* c) {
    Caches local;
    Caches& st = c ? *c : local;
    const int nv = static_cast<int>(s.vis.size());
    const int nm = static_cast<int>(s.mask.size());

    st.patches = extract_patches(s.pixels);
    M tokens = detail::linear(st.patches, embed_w_, embed_b_);
    st.seq_in = M(nv + 1, cfg_.dim);
    st.seq_in.row(0) = cls_.val.col(0).transpose() + pos_.row(0);
    for (int i = 0; i < nv; ++i) st.seq_in.row(i + 1) = tokens.row(s.vis[i]) + pos_.row(s.vis[i] + 1);

    M x = st.seq_in;
    st.enc.resize(blocks_.size());
    for (size_t i = 0; i < blocks_.size(); ++i) x = block_forward(blocks_[i], x, st.enc[i]);
    st.enc_out_in = x;
    const M enc_out = detail::layer_norm(x, norm_g_, norm_b_);

    st.evis = enc_out.bottomRows(nv);
    const M dvis = detail::linear(st.evis, dec_w_, dec_b_);
    st.d0 = M(nv + nm, cfg_.dec_dim);
    for (int i = 0; i < nv; ++i) st.d0.row(i) = dvis.row(i) + dec_pos_.row(s.vis[i]);
    for (int j = 0; j < nm; ++j) st.d0.row(nv + j) = mask_tok_.val.col(0).transpose() + dec_pos_.row(s.mask[j]);

    M dx = st.d0;
    st.dec.resize(dec_blocks_.size());
    for (size_t i = 0; i < dec_blocks_.size(); ++i) dx = block_forward(dec_blocks_[i], dx, st.dec[i]);
    st.dec_norm_in = dx;
    const M dnorm = detail::layer_norm(dx, dec_norm_g_, dec_norm_b_);
    st.masked_rows = dnorm.bottomRows(nm);
    st.pred = detail::linear(st.masked_rows, pred_w_, pred_b_);

    st.target = M(nm, cfg_.patch_dim());
    for (int j = 0; j < nm; ++j) {
      const auto row = st.patches.row(s.mask[j]);
      const double mean = row.mean();
      const double var = (row.array() - mean).square().sum() / (cfg_.patch_dim() - 1);
      st.target.row(j) = (row.array() - mean) / std::sqrt(var + 1e-6);
    }
    return (st.pred - st.target).squaredNorm() / (nm * cfg_.patch_dim());
  }

  double forward_backward(const std::vector<Sample>& batch) {
    double total = 0.0;
    for (const auto& s : batch) {
      Caches st;
      const double per_sample = sample_loss(s, &st);
      total += per_sample;
      const int nv = static_cast<int>(s.vis.size());
      const int nm = static_cast<int>(s.mask.size());

      // d L / d pred with L averaged over the whole batch
      const M gpred = 2.0 / (batch.size() * nm * cfg_.patch_dim()) * (st.pred - st.target);
      const M gmasked = detail::linear_back(st.masked_rows, gpred, pred_w_, pred_b_);
      M gdnorm = M::Zero(nv + nm, cfg_.dec_dim);
      gdnorm.bottomRows(nm) = gmasked;
      M gdx = detail::layer_norm_back(st.dec_norm_in, gdnorm, dec_norm_g_, dec_norm_b_);
      for (int i = static_cast<int>(dec_blocks_.size()) - 1; i >= 0; --i)
        gdx = block_backward(dec_blocks_[i], gdx, st.dec[i]);
      for (int j = 0; j < nm; ++j) mask_tok_.grad.col(0) += gdx.row(nv + j).transpose();
      const M gevis = detail::linear_back(st.evis, gdx.topRows(nv), dec_w_, dec_b_);

      M genc = M::Zero(nv + 1, cfg_.dim);
      genc.bottomRows(nv) = gevis;
      M gx = detail::layer_norm_back(st.enc_out_in, genc, norm_g_, norm_b_);
      for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) gx = block_backward(blocks_[i], gx, st.enc[i]);

      cls_.grad.col(0) += gx.row(0).transpose();
      M gtokens = M::Zero(cfg_.tokens(), cfg_.dim);
      for (int i = 0; i < nv; ++i) gtokens.row(s.vis[i]) = gx.row(i + 1);
      detail::linear_back(st.patches, gtokens, embed_w_, embed_b_);
    }
    return total / batch.size();
  }

  void adam_step(double lr) {
    ++step_;
    const double b1 = 0.9, b2 = 0.95, eps = 1e-8, wd = 0.05;
    const double c1 = 1.0 - std::pow(b1, step_);
    const double c2 = 1.0 - std::pow(b2, step_);
    for (auto& [name, t] : named()) {
      (void)name;
      t->m = b1 * t->m + (1 - b1) * t->grad;
      t->v = b2 * t->v + (1 - b2) * t->grad.cwiseProduct(t->grad);
      if (t->wd) t->val -= lr * wd * t->val;
      t->val.array() -= lr * (t->m.array() / c1) / ((t->v.array() / c2).sqrt() + eps);
    }
  }

  Config cfg_;
  Tensor embed_w_, embed_b_, cls_;
  std::vector<Block> blocks_;
  Tensor norm_g_, norm_b_;
  Tensor dec_w_, dec_b_, mask_tok_;
  std::vector<Block> dec_blocks_;
  Tensor dec_norm_g_, dec_norm_b_;
  Tensor pred_w_, pred_b_;
  M pos_, dec_pos_;
  long step_ = 0;
};

}  // namespace refmae
