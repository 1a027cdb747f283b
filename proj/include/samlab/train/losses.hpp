#pragma once

#include <vector>

#include "samlab/common.hpp"

namespace samlab {

struct LossConfig {
  double lambda_cls = 0.1;
  bool normalize_pixel_targets = true;
};

/// Mean squared error over every entry of the masked-patch predictions.
/// An empty prediction set has loss 0 by definition.
double recon_loss(const Mat& predictions, const Mat& targets);

/// d recon_loss / d predictions = 2 (Y - G) / entry_count.
Mat recon_loss_grad(const Mat& predictions, const Mat& targets);

/// Per-patch standardization of reconstruction targets: each row is shifted
/// to zero mean and scaled by 1/sqrt(var + 1e-6) (unbiased variance).
Mat standardize_target_rows(const Mat& targets);

struct ClsLoss {
  double value = 0.0;
  Mat probabilities;  // batch x K, rows sum to 1
};

/// Mean cross-entropy, computed on logits for stability. Matches
/// -(1/B) sum log(o_i[t_i]) on the returned probabilities within 1e-6.
ClsLoss cls_loss_from_logits(const Mat& logits, const std::vector<int>& labels);

/// d cls_loss / d logits = (probabilities - onehot) / batch.
Mat cls_loss_grad(const Mat& probabilities, const std::vector<int>& labels);

inline double total_loss(double l_con, double l_cls, const LossConfig& cfg) {
  check(cfg.lambda_cls >= 0.0, "total_loss: lambda must be nonnegative");
  return l_con + cfg.lambda_cls * l_cls;
}

}  // namespace samlab
