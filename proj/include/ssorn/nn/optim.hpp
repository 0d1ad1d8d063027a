#pragma once

#include <string>
#include <vector>

#include "ssorn/nn/tensor.hpp"

namespace ssorn::nn {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

// Adaptive moment estimation with bias correction.
class Adam {
 public:
  explicit Adam(ParamList params, double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step();
  void zero_grad();

 private:
  ParamList params_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace ssorn::nn
