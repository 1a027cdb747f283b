#pragma once

#include <string>
#include <vector>

#include "samlab/common.hpp"

namespace samlab {

// A named trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool decay = true;  // participates in weight decay
  int layer_id = 0;   // group for layer-wise lr decay

  void init(const std::string& n, int rows, int cols, bool wd) {
    name = n;
    value = Mat::Zero(rows, cols);
    grad = Mat::Zero(rows, cols);
    decay = wd;
  }
  void zero_grad() { grad.setZero(); }
};

class ParamRegistry {
 public:
  void add(Param* p) { params_.push_back(p); }
  const std::vector<Param*>& all() const { return params_; }
  std::vector<Param*>& all() { return params_; }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  Param* find(const std::string& name) const {
    for (auto* p : params_)
      if (p->name == name) return p;
    return nullptr;
  }

  size_t count_scalars() const {
    size_t n = 0;
    for (auto* p : params_) n += static_cast<size_t>(p->value.size());
    return n;
  }

 private:
  std::vector<Param*> params_;
};

}  // namespace samlab
