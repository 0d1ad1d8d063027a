#include "ssorn/nn/tensor.hpp"

#include <limits>
#include <unordered_set>

namespace ssorn::nn {

namespace {
thread_local bool g_grad_enabled = true;
thread_local KinkMeter* g_kink_meter = nullptr;

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw BadShape("non-positive dimension");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(const std::vector<int>& shape, double v, bool requires_grad) {
  Tensor t = zeros(shape, requires_grad);
  for (auto& x : t.value()) x = v;
  return t;
}

Tensor Tensor::from_vector(const std::vector<int>& shape, std::vector<double> data,
                           bool requires_grad) {
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
    throw BadShape("from_vector: data size does not match shape");
  }
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar_of(double v) { return from_vector({1}, {v}); }

void backward(const Tensor& root) {
  if (!root.defined()) throw BadShape("backward on undefined tensor");
  if (root.numel() != 1) throw BadShape("backward requires a scalar root");

  // Post-order topo sort (parents before node), iterative.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad();
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      for (auto& p : n->parents) {
        if (p->requires_grad) p->ensure_grad();
      }
      n->backward_fn(*n);
      // Interior gradients are never read again once propagated.
      std::vector<double>().swap(n->grad);
    }
  }
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

KinkMeter::KinkMeter()
    : prev_(g_kink_meter), min_dist_(std::numeric_limits<double>::infinity()) {
  g_kink_meter = this;
}
KinkMeter::~KinkMeter() { g_kink_meter = prev_; }

void kink_record(double distance) {
  if (g_kink_meter) g_kink_meter->record(distance);
}

}  // namespace ssorn::nn
