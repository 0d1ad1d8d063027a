#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

// Reverse-mode autodiff over dense double tensors. The graph is rebuilt on
// every forward pass; nodes own their values and lazily-allocated gradients.
// Heavy kernels (conv, linear, cost volume) sit in ops.hpp on top of Eigen.

namespace ssorn::nn {

struct BadShape : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until touched by backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad, accumulates into parents' grads. Null for leaves.
  std::function<void(Node&)> backward_fn;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
  static Tensor full(const std::vector<int>& shape, double v, bool requires_grad = false);
  static Tensor from_vector(const std::vector<int>& shape, std::vector<double> data,
                            bool requires_grad = false);
  static Tensor scalar_of(double v);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  std::int64_t numel() const { return node_->numel(); }

  std::vector<double>& value() { return node_->value; }
  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  void zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), 0.0);
  }

  double scalar() const {
    if (numel() != 1) throw BadShape("scalar() on non-scalar tensor");
    return node_->value[0];
  }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from a scalar root (seeded with grad 1).
void backward(const Tensor& root);

// While alive, ops do not record the graph; forward values only.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Gradient checking support: while installed, relu/abs record how close any
// argument came to their non-differentiable point.
class KinkMeter {
 public:
  KinkMeter();
  ~KinkMeter();
  KinkMeter(const KinkMeter&) = delete;
  KinkMeter& operator=(const KinkMeter&) = delete;
  double min_distance() const { return min_dist_; }
  void record(double d) {
    if (d < min_dist_) min_dist_ = d;
  }

 private:
  KinkMeter* prev_;
  double min_dist_;
};

void kink_record(double distance);

}  // namespace ssorn::nn
