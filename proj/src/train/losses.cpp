#include "samlab/train/losses.hpp"

#include <cmath>

namespace samlab {

double recon_loss(const Mat& predictions, const Mat& targets) {
  if (predictions.size() == 0 && targets.size() == 0) return 0.0;
  check(predictions.rows() == targets.rows() && predictions.cols() == targets.cols(),
        "recon_loss: prediction/target shape mismatch");
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

Mat recon_loss_grad(const Mat& predictions, const Mat& targets) {
  if (predictions.size() == 0) return Mat();
  check(predictions.rows() == targets.rows() && predictions.cols() == targets.cols(),
        "recon_loss_grad: prediction/target shape mismatch");
  return 2.0 / static_cast<double>(predictions.size()) * (predictions - targets);
}

Mat standardize_target_rows(const Mat& targets) {
  Mat out(targets.rows(), targets.cols());
  const auto d = targets.cols();
  for (Eigen::Index r = 0; r < targets.rows(); ++r) {
    const double mu = targets.row(r).mean();
    const double var = (targets.row(r).array() - mu).square().sum() / static_cast<double>(d - 1);
    out.row(r) = (targets.row(r).array() - mu) / std::sqrt(var + 1e-6);
  }
  return out;
}

ClsLoss cls_loss_from_logits(const Mat& logits, const std::vector<int>& labels) {
  const auto batch = logits.rows();
  check(static_cast<Eigen::Index>(labels.size()) == batch, "cls_loss: label count != batch");
  ClsLoss out;
  out.probabilities.resize(batch, logits.cols());
  double sum = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    check(labels[b] >= 0 && labels[b] < logits.cols(), "cls_loss: label out of range");
    const double m = logits.row(b).maxCoeff();
    const Eigen::ArrayXd shifted = logits.row(b).transpose().array() - m;
    const double lse = std::log(shifted.exp().sum());
    out.probabilities.row(b) = (shifted - lse).exp().transpose();
    sum += lse - shifted(labels[b]);
  }
  out.value = sum / static_cast<double>(batch);
  return out;
}

Mat cls_loss_grad(const Mat& probabilities, const std::vector<int>& labels) {
  Mat g = probabilities;
  for (Eigen::Index b = 0; b < g.rows(); ++b) g(b, labels[b]) -= 1.0;
  return g / static_cast<double>(g.rows());
}

}  // namespace samlab
