#include "samlab/model/layers.hpp"

#include <cmath>

namespace samlab {

namespace {

void trunc_normal_init(Mat& m, Rng& rng, double sigma = 0.02) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.trunc_normal(sigma);
}

}  // namespace

Linear::Linear(const std::string& name, int in, int out, Rng& rng, bool bias) {
  w.init(name + ".weight", out, in, /*wd=*/true);
  trunc_normal_init(w.value, rng);
  if (bias) b.init(name + ".bias", 1, out, /*wd=*/false);
}

void Linear::register_into(ParamRegistry& reg) {
  reg.add(&w);
  if (has_bias()) reg.add(&b);
}

void Linear::set_layer_id(int id) {
  w.layer_id = id;
  b.layer_id = id;
}

Mat Linear::forward(const Mat& x) {
  x_cache_ = x;
  return apply(x);
}

Mat Linear::apply(const Mat& x) const {
  Mat y = x * w.value.transpose();
  if (has_bias()) y.rowwise() += b.value.row(0);
  return y;
}

Mat Linear::backward(const Mat& gy) {
  w.grad.noalias() += gy.transpose() * x_cache_;
  if (has_bias()) b.grad.row(0) += gy.colwise().sum();
  return gy * w.value;
}

LayerNorm::LayerNorm(const std::string& name, int dim) {
  gamma.init(name + ".weight", 1, dim, /*wd=*/false);
  gamma.value.setOnes();
  beta.init(name + ".bias", 1, dim, /*wd=*/false);
}

void LayerNorm::register_into(ParamRegistry& reg) {
  reg.add(&gamma);
  reg.add(&beta);
}

void LayerNorm::set_layer_id(int id) {
  gamma.layer_id = id;
  beta.layer_id = id;
}

Mat LayerNorm::forward(const Mat& x) {
  const auto rows = x.rows();
  const auto d = x.cols();
  xhat_cache_.resize(rows, d);
  inv_std_cache_.resize(rows);
  Mat y(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std_cache_(r) = inv;
    xhat_cache_.row(r) = (x.row(r).array() - mu) * inv;
    y.row(r) = xhat_cache_.row(r).cwiseProduct(gamma.value.row(0)) + beta.value.row(0);
  }
  return y;
}

Mat LayerNorm::apply(const Mat& x) const {
  Mat y(x.rows(), x.cols());
  const auto d = x.cols();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kEps);
    y.row(r) = ((x.row(r).array() - mu) * inv).matrix().cwiseProduct(gamma.value.row(0)) + beta.value.row(0);
  }
  return y;
}

Mat LayerNorm::backward(const Mat& gy) {
  const auto rows = gy.rows();
  const auto d = gy.cols();
  Mat gx(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    gamma.grad.row(0) += gy.row(r).cwiseProduct(xhat_cache_.row(r));
    beta.grad.row(0) += gy.row(r);
    const Mat gxhat = gy.row(r).cwiseProduct(gamma.value.row(0));
    const double m1 = gxhat.mean();
    const double m2 = gxhat.cwiseProduct(xhat_cache_.row(r)).mean();
    gx.row(r) = inv_std_cache_(r) * (gxhat.array() - m1 - xhat_cache_.row(r).array() * m2);
  }
  return gx;
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Mat Gelu::apply(const Mat& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
}

Mat Gelu::forward(const Mat& x) {
  x_cache_ = x;
  return apply(x);
}

Mat Gelu::backward(const Mat& gy) const {
  Mat gx = x_cache_.unaryExpr([](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    return cdf + v * pdf;
  });
  return gx.cwiseProduct(gy);
}

Mat softmax_rows(const Mat& x) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

MultiHeadSelfAttention::MultiHeadSelfAttention(const std::string& name, int dim, int heads, Rng& rng)
    : dim_(dim), heads_(heads) {
  check(dim % heads == 0, "attention: dim must be divisible by heads");
  wq = Linear(name + ".wq", dim, dim, rng);
  wk = Linear(name + ".wk", dim, dim, rng);
  wv = Linear(name + ".wv", dim, dim, rng);
  wo = Linear(name + ".wo", dim, dim, rng);
}

void MultiHeadSelfAttention::register_into(ParamRegistry& reg) {
  wq.register_into(reg);
  wk.register_into(reg);
  wv.register_into(reg);
  wo.register_into(reg);
}

void MultiHeadSelfAttention::set_layer_id(int id) {
  wq.set_layer_id(id);
  wk.set_layer_id(id);
  wv.set_layer_id(id);
  wo.set_layer_id(id);
}

Mat MultiHeadSelfAttention::forward(const Mat& x, int batch, int seq) {
  check(x.rows() == static_cast<Eigen::Index>(batch) * seq, "attention: rows != batch*seq");
  batch_ = batch;
  seq_ = seq;
  const int dh = dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  q_ = wq.forward(x);
  k_ = wk.forward(x);
  v_ = wv.forward(x);

  attn_.assign(static_cast<size_t>(batch) * heads_, Mat());
  heads_out_.resize(x.rows(), dim_);
  for (int b = 0; b < batch; ++b) {
    const auto row0 = static_cast<Eigen::Index>(b) * seq;
    for (int i = 0; i < heads_; ++i) {
      const auto col0 = static_cast<Eigen::Index>(i) * dh;
      auto qi = q_.block(row0, col0, seq, dh);
      auto ki = k_.block(row0, col0, seq, dh);
      auto vi = v_.block(row0, col0, seq, dh);
      Mat scores = qi * ki.transpose() * scale;
      Mat a = softmax_rows(scores);
      heads_out_.block(row0, col0, seq, dh).noalias() = a * vi;
      attn_[static_cast<size_t>(b) * heads_ + i] = std::move(a);
    }
  }
  return wo.forward(heads_out_);
}

Mat MultiHeadSelfAttention::backward(const Mat& gy) {
  const int dh = dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Mat gheads = wo.backward(gy);
  Mat gq(gheads.rows(), dim_), gk(gheads.rows(), dim_), gv(gheads.rows(), dim_);
  for (int b = 0; b < batch_; ++b) {
    const auto row0 = static_cast<Eigen::Index>(b) * seq_;
    for (int i = 0; i < heads_; ++i) {
      const auto col0 = static_cast<Eigen::Index>(i) * dh;
      const Mat& a = attn_[static_cast<size_t>(b) * heads_ + i];
      auto qi = q_.block(row0, col0, seq_, dh);
      auto ki = k_.block(row0, col0, seq_, dh);
      auto vi = v_.block(row0, col0, seq_, dh);
      auto ghi = gheads.block(row0, col0, seq_, dh);

      Mat ga = ghi * vi.transpose();
      gv.block(row0, col0, seq_, dh).noalias() = a.transpose() * ghi;
      // softmax backward per row: gs = a .* (ga - rowsum(ga .* a))
      Mat gs(seq_, seq_);
      for (int r = 0; r < seq_; ++r) {
        const double dot = ga.row(r).cwiseProduct(a.row(r)).sum();
        gs.row(r) = a.row(r).cwiseProduct((ga.row(r).array() - dot).matrix());
      }
      gq.block(row0, col0, seq_, dh).noalias() = gs * ki * scale;
      gk.block(row0, col0, seq_, dh).noalias() = gs.transpose() * qi * scale;
    }
  }
  Mat gx = wq.backward(gq);
  gx += wk.backward(gk);
  gx += wv.backward(gv);
  return gx;
}

TransformerBlock::TransformerBlock(const std::string& name, int dim, int heads, Rng& rng)
    : ln1_(name + ".norm1", dim),
      ln2_(name + ".norm2", dim),
      attn_(name + ".attn", dim, heads, rng),
      fc1_(name + ".mlp.fc1", dim, 4 * dim, rng),
      fc2_(name + ".mlp.fc2", 4 * dim, dim, rng) {}

void TransformerBlock::register_into(ParamRegistry& reg) {
  ln1_.register_into(reg);
  attn_.register_into(reg);
  ln2_.register_into(reg);
  fc1_.register_into(reg);
  fc2_.register_into(reg);
}

void TransformerBlock::set_layer_id(int id) {
  ln1_.set_layer_id(id);
  attn_.set_layer_id(id);
  ln2_.set_layer_id(id);
  fc1_.set_layer_id(id);
  fc2_.set_layer_id(id);
}

Mat TransformerBlock::forward(const Mat& x, int batch, int seq) {
  Mat y = x + attn_.forward(ln1_.forward(x), batch, seq);
  Mat z = y + fc2_.forward(act_.forward(fc1_.forward(ln2_.forward(y))));
  return z;
}

Mat TransformerBlock::backward(const Mat& gz) {
  Mat gy = gz + ln2_.backward(fc1_.backward(act_.backward(fc2_.backward(gz))));
  Mat gx = gy + ln1_.backward(attn_.backward(gy));
  return gx;
}

Mat sincos_position_embedding(int grid_h, int grid_w, int dim, bool with_cls_row) {
  check(dim % 4 == 0, "sincos_position_embedding: dim must be divisible by 4");
  const int half = dim / 2;     // per axis
  const int quarter = dim / 4;  // sin (or cos) bands per axis
  const int offset = with_cls_row ? 1 : 0;
  Mat pe = Mat::Zero(grid_h * grid_w + offset, dim);
  for (int gy = 0; gy < grid_h; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      const int row = offset + gy * grid_w + gx;
      for (int k = 0; k < quarter; ++k) {
        const double omega = std::pow(10000.0, -static_cast<double>(k) / quarter);
        pe(row, k) = std::sin(gy * omega);
        pe(row, quarter + k) = std::cos(gy * omega);
        pe(row, half + k) = std::sin(gx * omega);
        pe(row, half + quarter + k) = std::cos(gx * omega);
      }
    }
  }
  return pe;
}

}  // namespace samlab
