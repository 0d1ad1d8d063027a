#pragma once

#include <stdexcept>
#include <vector>

#include "ssorn/core/image.hpp"

namespace ssorn::match {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rank-3 feature map, h x w cells with d channels. Stored channel-major.
struct FeatureMap {
  int h = 0, w = 0, d = 0;
  std::vector<double> data;  // data[c*h*w + y*w + x]

  FeatureMap() = default;
  FeatureMap(int h_, int w_, int d_) : h(h_), w(w_), d(d_), data(size_t(h_) * w_ * d_, 0.0) {
    if (h_ < 1 || w_ < 1 || d_ < 1) throw std::invalid_argument("FeatureMap: bad shape");
  }
  double& at(int y, int x, int c) { return data[(size_t(c) * h + y) * w + x]; }
  double at(int y, int x, int c) const { return data[(size_t(c) * h + y) * w + x]; }
  int cells() const { return h * w; }
};

// Dense matching costs between two h x w feature grids.
// 2D form: (hw x hw) matrix, row i = source cell i (row-major spatial order),
// column j = target cell j. The equivalent 3D form places 2D element (i, j)
// at (i / w, i mod w, j): channels enumerate target cells in row-major order.
struct CostVolume {
  int h = 0, w = 0;
  std::vector<double> data2d;  // row-major (hw x hw)

  CostVolume() = default;
  CostVolume(int h_, int w_) : h(h_), w(w_), data2d(size_t(h_) * w_ * h_ * w_, 0.0) {}
  int cells() const { return h * w; }
  double& at2d(int i, int j) { return data2d[size_t(i) * cells() + j]; }
  double at2d(int i, int j) const { return data2d[size_t(i) * cells() + j]; }
  // 3D view of the same data.
  double at3d(int y, int x, int c) const { return at2d(y * w + x, c); }
};

// Explicit rank-3 array used by the 2D<->3D reshape pair.
struct CostVolume3d {
  int h = 0, w = 0, c = 0;
  std::vector<double> data;  // data[(y*w + x)*c + ch]

  CostVolume3d() = default;
  CostVolume3d(int h_, int w_, int c_) : h(h_), w(w_), c(c_), data(size_t(h_) * w_ * c_, 0.0) {}
  double& at(int y, int x, int ch) { return data[(size_t(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return data[(size_t(y) * w + x) * c + ch]; }
};

// C2D(i, j) = (1/D) <Fa vector at cell i, Fb vector at cell j>, computed as
// a single matrix product over all pairs.
CostVolume cost_volume(const FeatureMap& fa, const FeatureMap& fb);

CostVolume3d reshape_2d_to_3d(const CostVolume& cv);
CostVolume reshape_3d_to_2d(const CostVolume3d& cv);

// Min-max normalized 8-bit heatmap of the 2D form (constant volumes map to 0).
ImageU8 render_heatmap(const CostVolume& cv);

}  // namespace ssorn::match
