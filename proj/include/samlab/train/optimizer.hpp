#pragma once

#include <vector>

#include "samlab/common.hpp"
#include "samlab/model/params.hpp"

namespace samlab {

/// Decoupled weight decay Adam. Parameters flagged decay=false (biases,
/// norms, class/mask tokens) are excluded from the decay term.
class AdamW {
 public:
  AdamW(std::vector<Param*> params, double beta1, double beta2, double weight_decay, double eps = 1e-8);

  void step(double lr);

  /// Per-parameter lr multipliers (layer-wise decay); defaults to all ones.
  void set_lr_scales(std::vector<double> scales);

  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  std::vector<Mat> m_, v_;
  std::vector<double> scales_;
  double beta1_, beta2_, weight_decay_, eps_;
  long t_ = 0;
};

/// Linear warmup then cosine decay to zero, evaluated at a fractional epoch.
double cosine_lr(double base_lr, double epoch_frac, int warmup_epochs, int total_epochs);

/// scale(p) = decay^(layer_count - p.layer_id); the top group (heads) gets 1.
std::vector<double> layerwise_lr_scales(const std::vector<Param*>& params, int layer_count, double decay);

}  // namespace samlab
