#include "ssorn/nn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssorn::nn::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

Tensor make_node(const std::vector<int>& shape, std::initializer_list<Tensor> parents,
                 std::function<void(Node&)>&& bw) {
  Tensor out = Tensor::zeros(shape);
  bool need = false;
  if (grad_enabled()) {
    for (const auto& p : parents) need = need || p.requires_grad();
  }
  if (need) {
    out.node()->requires_grad = true;
    for (const auto& p : parents) out.node()->parents.push_back(p.node());
    out.node()->backward_fn = std::move(bw);
  }
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (a.shape() != b.shape()) throw BadShape(std::string(who) + ": shape mismatch");
}

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

void im2col(const double* x, int c_in, int h, int w, int k, int stride, int pad, int oh, int ow,
            double* cols) {
  const int ohw = oh * ow;
  for (int c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (size_t(c * k + ky) * k + kx) * ohw;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * ow, row + (oy + 1) * ow, 0.0);
            continue;
          }
          const double* xrow = x + (size_t(c) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[oy * ow + ox] = (ix >= 0 && ix < w) ? xrow[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int c_in, int h, int w, int k, int stride, int pad, int oh,
                int ow, double* dx) {
  const int ohw = oh * ow;
  for (int c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (size_t(c * k + ky) * k + kx) * ohw;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* xrow = dx + (size_t(c) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) xrow[ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_node(a.shape(), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      Node& par = *self.parents[p];
      if (!par.requires_grad) continue;
      for (size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
    }
  });
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_node(a.shape(), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
  });
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = make_node(a.shape(), {a}, [s](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += s * self.grad[i];
  });
  const auto& av = a.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = s * av[i];
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = make_node(x.shape(), {x}, [](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      if (px.value[i] > 0.0) px.grad[i] += self.grad[i];
    }
  });
  const auto& xv = x.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) {
    kink_record(std::abs(xv[i]));
    ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  }
  return out;
}

Tensor concat1(const Tensor& a, const Tensor& b) {
  if (a.ndim() != b.ndim() || a.ndim() < 2) throw BadShape("concat1: rank mismatch");
  for (int i = 0; i < a.ndim(); ++i) {
    if (i != 1 && a.dim(i) != b.dim(i)) throw BadShape("concat1: dims differ outside axis 1");
  }
  std::vector<int> shape = a.shape();
  shape[1] = a.dim(1) + b.dim(1);
  const int n = a.dim(0);
  std::int64_t inner = 1;
  for (int i = 2; i < a.ndim(); ++i) inner *= a.dim(i);
  const std::int64_t block_a = a.dim(1) * inner, block_b = b.dim(1) * inner;

  Tensor out = make_node(shape, {a, b}, [n, block_a, block_b](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::int64_t block = block_a + block_b;
    for (int s = 0; s < n; ++s) {
      const double* g = self.grad.data() + s * block;
      if (pa.requires_grad) {
        double* ga = pa.grad.data() + s * block_a;
        for (std::int64_t i = 0; i < block_a; ++i) ga[i] += g[i];
      }
      if (pb.requires_grad) {
        double* gb = pb.grad.data() + s * block_b;
        for (std::int64_t i = 0; i < block_b; ++i) gb[i] += g[block_a + i];
      }
    }
  });
  for (int s = 0; s < n; ++s) {
    std::memcpy(out.value().data() + s * (block_a + block_b), a.value().data() + s * block_a,
                block_a * sizeof(double));
    std::memcpy(out.value().data() + s * (block_a + block_b) + block_a,
                b.value().data() + s * block_b, block_b * sizeof(double));
  }
  return out;
}

Tensor reshape(const Tensor& x, const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  if (n != x.numel()) throw BadShape("reshape: numel mismatch");
  Tensor out = make_node(shape, {x}, [](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
  });
  out.value() = x.value();
  return out;
}

Tensor flatten(const Tensor& x) {
  return reshape(x, {x.dim(0), static_cast<int>(x.numel() / x.dim(0))});
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  if (x.ndim() != 4 || w.ndim() != 4) throw BadShape("conv2d: expects 4-d input and weight");
  const int n = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int c_out = w.dim(0), k = w.dim(2);
  if (w.dim(1) != c_in || w.dim(3) != k) throw BadShape("conv2d: weight shape mismatch");
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != c_out)) throw BadShape("conv2d: bad bias");
  const int oh = conv_out(h, k, stride, pad), ow = conv_out(wd, k, stride, pad);
  if (oh <= 0 || ow <= 0) throw BadShape("conv2d: output collapses to zero");
  const int ckk = c_in * k * k, ohw = oh * ow;
  const bool has_bias = b.defined();

  auto bw = [=](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node* pb = has_bias ? self.parents[2].get() : nullptr;
    CMapM wm(pw.value.data(), c_out, ckk);

    if (px.requires_grad) {
#pragma omp parallel for schedule(static)
      for (int s = 0; s < n; ++s) {
        std::vector<double> dcols(size_t(ckk) * ohw);
        CMapM dy(self.grad.data() + size_t(s) * c_out * ohw, c_out, ohw);
        MapM dc(dcols.data(), ckk, ohw);
        dc.noalias() = wm.transpose() * dy;
        col2im_add(dcols.data(), c_in, h, wd, k, stride, pad, oh, ow,
                   px.grad.data() + size_t(s) * c_in * h * wd);
      }
    }
    if (pw.requires_grad) {
      // Per-sample partials summed in sample order: bitwise deterministic
      // for any thread count.
      std::vector<double> partial(size_t(n) * c_out * ckk);
#pragma omp parallel for schedule(static)
      for (int s = 0; s < n; ++s) {
        std::vector<double> cols(size_t(ckk) * ohw);
        im2col(px.value.data() + size_t(s) * c_in * h * wd, c_in, h, wd, k, stride, pad, oh, ow,
               cols.data());
        CMapM dy(self.grad.data() + size_t(s) * c_out * ohw, c_out, ohw);
        CMapM cm(cols.data(), ckk, ohw);
        MapM pm(partial.data() + size_t(s) * c_out * ckk, c_out, ckk);
        pm.noalias() = dy * cm.transpose();
      }
      MapM dwm(pw.grad.data(), c_out, ckk);
      for (int s = 0; s < n; ++s) {
        dwm += CMapM(partial.data() + size_t(s) * c_out * ckk, c_out, ckk);
      }
    }
    if (pb && pb->requires_grad) {
      for (int s = 0; s < n; ++s) {
        const double* g = self.grad.data() + size_t(s) * c_out * ohw;
        for (int c = 0; c < c_out; ++c) {
          double acc = 0.0;
          for (int i = 0; i < ohw; ++i) acc += g[size_t(c) * ohw + i];
          pb->grad[c] += acc;
        }
      }
    }
  };

  Tensor out = has_bias ? make_node({n, c_out, oh, ow}, {x, w, b}, std::move(bw))
                        : make_node({n, c_out, oh, ow}, {x, w}, std::move(bw));

  CMapM wm(w.value().data(), c_out, ckk);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s) {
    std::vector<double> cols(size_t(ckk) * ohw);
    im2col(x.value().data() + size_t(s) * c_in * h * wd, c_in, h, wd, k, stride, pad, oh, ow,
           cols.data());
    CMapM cm(cols.data(), ckk, ohw);
    MapM om(out.value().data() + size_t(s) * c_out * ohw, c_out, ohw);
    om.noalias() = wm * cm;
    if (has_bias) {
      for (int c = 0; c < c_out; ++c) om.row(c).array() += b.value()[c];
    }
  }
  return out;
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  double eps) {
  if (x.ndim() != 4) throw BadShape("group_norm: expects NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c % groups != 0) throw BadShape("group_norm: channels not divisible by groups");
  if (gamma.numel() != c || beta.numel() != c) throw BadShape("group_norm: bad affine params");
  const int cg = c / groups;
  const std::int64_t m = std::int64_t(cg) * h * w;  // elements per (sample, group)
  const std::int64_t hw = std::int64_t(h) * w;

  // (mean, invstd) per (n, g), shared with the backward pass.
  auto stats = std::make_shared<std::vector<double>>(size_t(n) * groups * 2);

  auto bw = [=](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pbt = *self.parents[2];
#pragma omp parallel for schedule(static) collapse(2)
    for (int s = 0; s < n; ++s) {
      for (int g = 0; g < groups; ++g) {
        const double mean = (*stats)[(size_t(s) * groups + g) * 2];
        const double inv = (*stats)[(size_t(s) * groups + g) * 2 + 1];
        const std::int64_t base = (std::int64_t(s) * c + std::int64_t(g) * cg) * hw;
        // Accumulate the two per-group reductions of dxhat.
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (std::int64_t i = 0; i < m; ++i) {
          const int ch = g * cg + static_cast<int>(i / hw);
          const double xh = (px.value[base + i] - mean) * inv;
          const double dxh = self.grad[base + i] * pg.value[ch];
          sum_dxh += dxh;
          sum_dxh_xh += dxh * xh;
        }
        if (px.requires_grad) {
          const double inv_m = 1.0 / static_cast<double>(m);
          for (std::int64_t i = 0; i < m; ++i) {
            const int ch = g * cg + static_cast<int>(i / hw);
            const double xh = (px.value[base + i] - mean) * inv;
            const double dxh = self.grad[base + i] * pg.value[ch];
            px.grad[base + i] += inv * (dxh - inv_m * sum_dxh - xh * inv_m * sum_dxh_xh);
          }
        }
      }
    }
    if (pg.requires_grad || pbt.requires_grad) {
      for (int s = 0; s < n; ++s) {
        for (int g = 0; g < groups; ++g) {
          const double mean = (*stats)[(size_t(s) * groups + g) * 2];
          const double inv = (*stats)[(size_t(s) * groups + g) * 2 + 1];
          const std::int64_t base = (std::int64_t(s) * c + std::int64_t(g) * cg) * hw;
          for (std::int64_t i = 0; i < m; ++i) {
            const int ch = g * cg + static_cast<int>(i / hw);
            const double xh = (px.value[base + i] - mean) * inv;
            if (pg.requires_grad) pg.grad[ch] += self.grad[base + i] * xh;
            if (pbt.requires_grad) pbt.grad[ch] += self.grad[base + i];
          }
        }
      }
    }
  };

  Tensor out = make_node(x.shape(), {x, gamma, beta}, std::move(bw));
#pragma omp parallel for schedule(static) collapse(2)
  for (int s = 0; s < n; ++s) {
    for (int g = 0; g < groups; ++g) {
      const std::int64_t base = (std::int64_t(s) * c + std::int64_t(g) * cg) * hw;
      double sum = 0.0, sq = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        const double v = x.value()[base + i];
        sum += v;
        sq += v * v;
      }
      const double mean = sum / static_cast<double>(m);
      const double var = std::max(0.0, sq / static_cast<double>(m) - mean * mean);
      const double inv = 1.0 / std::sqrt(var + eps);
      (*stats)[(size_t(s) * groups + g) * 2] = mean;
      (*stats)[(size_t(s) * groups + g) * 2 + 1] = inv;
      for (std::int64_t i = 0; i < m; ++i) {
        const int ch = g * cg + static_cast<int>(i / hw);
        const double xh = (x.value()[base + i] - mean) * inv;
        out.value()[base + i] = gamma.value()[ch] * xh + beta.value()[ch];
      }
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& x, int k, int stride, int pad) {
  if (x.ndim() != 4) throw BadShape("maxpool2d: expects NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out(h, k, stride, pad), ow = conv_out(w, k, stride, pad);
  if (oh <= 0 || ow <= 0) throw BadShape("maxpool2d: output collapses to zero");

  auto argmax = std::make_shared<std::vector<std::int64_t>>(size_t(n) * c * oh * ow);

  auto bw = [=](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) px.grad[(*argmax)[i]] += self.grad[i];
  };

  Tensor out = make_node({n, c, oh, ow}, {x}, std::move(bw));
#pragma omp parallel for schedule(static) collapse(2)
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const std::int64_t in_base = (std::int64_t(s) * c + ch) * h * w;
      const std::int64_t out_base = (std::int64_t(s) * c + ch) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_idx = -1;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              const double v = x.value()[in_base + std::int64_t(iy) * w + ix];
              if (v > best) {
                best = v;
                best_idx = in_base + std::int64_t(iy) * w + ix;
              }
            }
          }
          out.value()[out_base + std::int64_t(oy) * ow + ox] = best;
          (*argmax)[out_base + std::int64_t(oy) * ow + ox] = best_idx;
        }
      }
    }
  }
  return out;
}

Tensor avgpool_adaptive(const Tensor& x, int out_h, int out_w) {
  if (x.ndim() != 4) throw BadShape("avgpool_adaptive: expects NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (out_h > h || out_w > w || out_h < 1 || out_w < 1) {
    throw BadShape("avgpool_adaptive: bad target size");
  }
  auto lo = [](int o, int in, int out) { return (o * in) / out; };
  auto hi = [](int o, int in, int out) { return ((o + 1) * in) / out; };

  auto bw = [=](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
#pragma omp parallel for schedule(static) collapse(2)
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < c; ++ch) {
        const std::int64_t in_base = (std::int64_t(s) * c + ch) * h * w;
        const std::int64_t out_base = (std::int64_t(s) * c + ch) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
          for (int ox = 0; ox < out_w; ++ox) {
            const int y0 = lo(oy, h, out_h), y1 = hi(oy, h, out_h);
            const int x0 = lo(ox, w, out_w), x1 = hi(ox, w, out_w);
            const double g = self.grad[out_base + std::int64_t(oy) * out_w + ox] /
                             (double(y1 - y0) * double(x1 - x0));
            for (int iy = y0; iy < y1; ++iy)
              for (int ix = x0; ix < x1; ++ix) px.grad[in_base + std::int64_t(iy) * w + ix] += g;
          }
        }
      }
    }
  };

  Tensor out = make_node({n, c, out_h, out_w}, {x}, std::move(bw));
#pragma omp parallel for schedule(static) collapse(2)
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const std::int64_t in_base = (std::int64_t(s) * c + ch) * h * w;
      const std::int64_t out_base = (std::int64_t(s) * c + ch) * out_h * out_w;
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
          const int y0 = lo(oy, h, out_h), y1 = hi(oy, h, out_h);
          const int x0 = lo(ox, w, out_w), x1 = hi(ox, w, out_w);
          double acc = 0.0;
          for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix) acc += x.value()[in_base + std::int64_t(iy) * w + ix];
          out.value()[out_base + std::int64_t(oy) * out_w + ox] =
              acc / (double(y1 - y0) * double(x1 - x0));
        }
      }
    }
  }
  return out;
}

Tensor upsample_nearest2x(const Tensor& x) {
  if (x.ndim() != 4) throw BadShape("upsample_nearest2x: expects NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);

  auto bw = [=](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < c; ++ch) {
        const std::int64_t in_base = (std::int64_t(s) * c + ch) * h * w;
        const std::int64_t out_base = (std::int64_t(s) * c + ch) * 4 * h * w;
        for (int y = 0; y < h; ++y) {
          for (int xx = 0; xx < w; ++xx) {
            double acc = 0.0;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                acc += self.grad[out_base + std::int64_t(2 * y + dy) * 2 * w + 2 * xx + dx];
            px.grad[in_base + std::int64_t(y) * w + xx] += acc;
          }
        }
      }
    }
  };

  Tensor out = make_node({n, c, 2 * h, 2 * w}, {x}, std::move(bw));
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const std::int64_t in_base = (std::int64_t(s) * c + ch) * h * w;
      const std::int64_t out_base = (std::int64_t(s) * c + ch) * 4 * h * w;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const double v = x.value()[in_base + std::int64_t(y) * w + xx];
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              out.value()[out_base + std::int64_t(2 * y + dy) * 2 * w + 2 * xx + dx] = v;
        }
      }
    }
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2) throw BadShape("linear: expects 2-d input and weight");
  const int n = x.dim(0), f = x.dim(1), o = w.dim(0);
  if (w.dim(1) != f) throw BadShape("linear: weight/input width mismatch");
  if (b.defined() && b.numel() != o) throw BadShape("linear: bad bias");
  const bool has_bias = b.defined();

  auto bw = [=](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    CMapM dy(self.grad.data(), n, o);
    if (px.requires_grad) {
      MapM dx(px.grad.data(), n, f);
      CMapM wm(pw.value.data(), o, f);
      dx.noalias() += dy * wm;
    }
    if (pw.requires_grad) {
      MapM dw(pw.grad.data(), o, f);
      CMapM xm(px.value.data(), n, f);
      dw.noalias() += dy.transpose() * xm;
    }
    if (has_bias && self.parents[2]->requires_grad) {
      for (int s = 0; s < n; ++s)
        for (int j = 0; j < o; ++j) self.parents[2]->grad[j] += self.grad[size_t(s) * o + j];
    }
  };

  Tensor out = has_bias ? make_node({n, o}, {x, w, b}, std::move(bw))
                        : make_node({n, o}, {x, w}, std::move(bw));
  CMapM xm(x.value().data(), n, f);
  CMapM wm(w.value().data(), o, f);
  MapM om(out.value().data(), n, o);
  om.noalias() = xm * wm.transpose();
  if (has_bias) {
    for (int s = 0; s < n; ++s)
      for (int j = 0; j < o; ++j) om(s, j) += b.value()[j];
  }
  return out;
}

Tensor cost_volume2d(const Tensor& fa, const Tensor& fb) {
  if (fa.ndim() != 4 || fb.ndim() != 4) throw BadShape("cost_volume2d: expects NCHW");
  if (fa.shape() != fb.shape()) throw BadShape("cost_volume2d: feature shapes differ");
  const int n = fa.dim(0), d = fa.dim(1), h = fa.dim(2), w = fa.dim(3);
  const int cells = h * w;
  const double inv_d = 1.0 / static_cast<double>(d);

  auto bw = [=](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
      CMapM dc(self.grad.data() + size_t(s) * cells * cells, cells, cells);
      CMapM am(pa.value.data() + size_t(s) * d * cells, d, cells);
      CMapM bm(pb.value.data() + size_t(s) * d * cells, d, cells);
      if (pa.requires_grad) {
        MapM da(pa.grad.data() + size_t(s) * d * cells, d, cells);
        da.noalias() += inv_d * (bm * dc.transpose());
      }
      if (pb.requires_grad) {
        MapM db(pb.grad.data() + size_t(s) * d * cells, d, cells);
        db.noalias() += inv_d * (am * dc);
      }
    }
  };

  Tensor out = make_node({n, cells, cells}, {fa, fb}, std::move(bw));
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s) {
    CMapM am(fa.value().data() + size_t(s) * d * cells, d, cells);
    CMapM bm(fb.value().data() + size_t(s) * d * cells, d, cells);
    MapM om(out.value().data() + size_t(s) * cells * cells, cells, cells);
    om.noalias() = inv_d * (am.transpose() * bm);
  }
  return out;
}

Tensor transpose12(const Tensor& x) {
  if (x.ndim() != 3) throw BadShape("transpose12: expects (N, A, B)");
  const int n = x.dim(0), a = x.dim(1), b = x.dim(2);

  auto bw = [=](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
      const double* g = self.grad.data() + size_t(s) * a * b;
      double* dx = px.grad.data() + size_t(s) * a * b;
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < a; ++j) dx[size_t(j) * b + i] += g[size_t(i) * a + j];
    }
  };

  Tensor out = make_node({n, b, a}, {x}, std::move(bw));
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s) {
    const double* in = x.value().data() + size_t(s) * a * b;
    double* o = out.value().data() + size_t(s) * a * b;
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < b; ++j) o[size_t(j) * a + i] = in[size_t(i) * b + j];
  }
  return out;
}

Tensor mean_sq(const Tensor& x) {
  const double inv_m = 1.0 / static_cast<double>(x.numel());
  Tensor out = make_node({1}, {x}, [inv_m](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    const double g = self.grad[0] * inv_m * 2.0;
    for (size_t i = 0; i < px.value.size(); ++i) px.grad[i] += g * px.value[i];
  });
  double acc = 0.0;
  for (double v : x.value()) acc += v * v;
  out.value()[0] = acc * inv_m;
  return out;
}

Tensor mean_abs(const Tensor& x) {
  const double inv_m = 1.0 / static_cast<double>(x.numel());
  Tensor out = make_node({1}, {x}, [inv_m](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    const double g = self.grad[0] * inv_m;
    for (size_t i = 0; i < px.value.size(); ++i) {
      const double v = px.value[i];
      if (v > 0.0)
        px.grad[i] += g;
      else if (v < 0.0)
        px.grad[i] -= g;
    }
  });
  double acc = 0.0;
  for (double v : x.value()) {
    kink_record(std::abs(v));
    acc += std::abs(v);
  }
  out.value()[0] = acc * inv_m;
  return out;
}

}  // namespace ssorn::nn::ops
