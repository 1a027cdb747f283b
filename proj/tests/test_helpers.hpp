#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "samlab/model/vit.hpp"
#include "samlab/rng.hpp"

namespace samlab::testing {

inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

inline Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline Image random_image(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int checked = 0;
};

/// Central finite differences of the pre-training total loss against the
/// analytic gradients, over every scalar in `params` (or a pseudo-random
/// subset of max_per_param entries when positive).
inline GradCheckResult gradcheck_pretrain(MaskedAutoencoder& model, const Mat& patches, int batch,
                                          const std::vector<TokenPartition>& parts, const std::vector<int>& labels,
                                          const LossConfig& loss_cfg, const std::vector<Param*>& params,
                                          int max_per_param = 0, double step = 1e-4) {
  model.params().zero_grad();
  model.forward_pretrain(patches, batch, parts, labels, loss_cfg);
  model.backward_pretrain();

  GradCheckResult result;
  Rng pick(12345);
  for (Param* p : params) {
    std::vector<Eigen::Index> entries;
    if (max_per_param > 0 && p->value.size() > max_per_param) {
      for (int k = 0; k < max_per_param; ++k) entries.push_back(pick.uniform_int(static_cast<int>(p->value.size())));
    } else {
      for (Eigen::Index k = 0; k < p->value.size(); ++k) entries.push_back(k);
    }
    for (Eigen::Index k : entries) {
      double* v = p->value.data() + k;
      const double saved = *v;
      *v = saved + step;
      const double up = model.forward_pretrain(patches, batch, parts, labels, loss_cfg).l_total;
      *v = saved - step;
      const double down = model.forward_pretrain(patches, batch, parts, labels, loss_cfg).l_total;
      *v = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = *(p->grad.data() + k);
      const double err = std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic));
      ++result.checked;
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst_param = p->name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return result;
}

}  // namespace samlab::testing
