#pragma once

#include <vector>

#include "mtk/array.hpp"

namespace mtk {

struct AdamConfig {
  double lr = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.99;  // global gradient-norm ceiling; <= 0 disables
};

// sqrt of the summed squared gradients over all params
double global_grad_norm(const std::vector<nd::Array>& params);

// scales every gradient by clip_norm / norm when norm exceeds clip_norm
void clip_global_norm(std::vector<nd::Array>& params, double clip_norm);

class Adam {
 public:
  Adam(std::vector<nd::Array> params, AdamConfig cfg = {});

  // clip + Adam update from the gradients currently stored on the params
  void step();
  void zero_grad();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<nd::Array> params_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace mtk
