#include "samlab/train/optimizer.hpp"

#include <cmath>

namespace samlab {

AdamW::AdamW(std::vector<Param*> params, double beta1, double beta2, double weight_decay, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
  scales_.assign(params_.size(), 1.0);
}

void AdamW::set_lr_scales(std::vector<double> scales) {
  check(scales.size() == params_.size(), "AdamW: scale count != param count");
  scales_ = std::move(scales);
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    const double lr_i = lr * scales_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p->grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    const Mat mhat = m_[i] / bc1;
    const Mat vhat = v_[i] / bc2;
    if (p->decay && weight_decay_ > 0.0) p->value -= lr_i * weight_decay_ * p->value;
    p->value.array() -= lr_i * (mhat.array() / (vhat.array().sqrt() + eps_));
  }
}

double cosine_lr(double base_lr, double epoch_frac, int warmup_epochs, int total_epochs) {
  if (warmup_epochs > 0 && epoch_frac < warmup_epochs) return base_lr * epoch_frac / warmup_epochs;
  const double progress = (epoch_frac - warmup_epochs) / std::max(1e-12, static_cast<double>(total_epochs - warmup_epochs));
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * std::min(progress, 1.0)));
}

std::vector<double> layerwise_lr_scales(const std::vector<Param*>& params, int layer_count, double decay) {
  std::vector<double> scales;
  scales.reserve(params.size());
  for (const Param* p : params) scales.push_back(std::pow(decay, layer_count - p->layer_id));
  return scales;
}

}  // namespace samlab
