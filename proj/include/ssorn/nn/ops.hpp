#pragma once

#include "ssorn/nn/tensor.hpp"

// Differentiable kernels. Image-like tensors are NCHW; matrices are
// row-major (N, F). All kernels are deterministic for a fixed input,
// independent of thread count.

namespace ssorn::nn::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);

// Concatenate along dimension 1 (channels / features).
Tensor concat1(const Tensor& a, const Tensor& b);

// Copying reshape; numel must match.
Tensor reshape(const Tensor& x, const std::vector<int>& shape);
Tensor flatten(const Tensor& x);  // (N, ...) -> (N, rest)

// x: (N, Cin, H, W); w: (Cout, Cin, k, k); b: (Cout) or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

// gamma, beta: (C). Statistics per (sample, group) over (C/G, H, W).
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  double eps = 1e-5);

Tensor maxpool2d(const Tensor& x, int k, int stride, int pad);

// Output cell (oy, ox) averages input rows [oy*H/th, (oy+1)*H/th) etc.
Tensor avgpool_adaptive(const Tensor& x, int out_h, int out_w);

Tensor upsample_nearest2x(const Tensor& x);

// x: (N, F); w: (O, F); b: (O) or undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// fa, fb: (N, D, h, w) -> (N, hw, hw); entry (i, j) = <fa_i, fb_j> / D.
Tensor cost_volume2d(const Tensor& fa, const Tensor& fb);

// (N, A, B) -> (N, B, A).
Tensor transpose12(const Tensor& x);

// Scalar reductions over all elements.
Tensor mean_sq(const Tensor& x);
Tensor mean_abs(const Tensor& x);

}  // namespace ssorn::nn::ops
