#include "ssorn/matching/cost_volume.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace ssorn::match {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

CostVolume cost_volume(const FeatureMap& fa, const FeatureMap& fb) {
  if (fa.h != fb.h || fa.w != fb.w || fa.d != fb.d) {
    throw ShapeMismatch("cost_volume: feature map shapes differ");
  }
  const int n = fa.cells(), d = fa.d;
  // Channel-major storage means each feature map is a (d x hw) matrix whose
  // columns are the per-cell feature vectors.
  Eigen::Map<const RowMat> ma(fa.data.data(), d, n);
  Eigen::Map<const RowMat> mb(fb.data.data(), d, n);
  CostVolume cv(fa.h, fa.w);
  Eigen::Map<RowMat> out(cv.data2d.data(), n, n);
  out.noalias() = (ma.transpose() * mb) / static_cast<double>(d);
  return cv;
}

CostVolume3d reshape_2d_to_3d(const CostVolume& cv) {
  const int n = cv.cells();
  CostVolume3d out(cv.h, cv.w, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.at(i / cv.w, i % cv.w, j) = cv.at2d(i, j);
  return out;
}

CostVolume reshape_3d_to_2d(const CostVolume3d& v) {
  if (v.c != v.h * v.w) throw ShapeMismatch("reshape_3d_to_2d: channel count != h*w");
  CostVolume cv(v.h, v.w);
  for (int y = 0; y < v.h; ++y)
    for (int x = 0; x < v.w; ++x)
      for (int j = 0; j < v.c; ++j) cv.at2d(y * v.w + x, j) = v.at(y, x, j);
  return cv;
}

ImageU8 render_heatmap(const CostVolume& cv) {
  const int n = cv.cells();
  const auto [mn_it, mx_it] = std::minmax_element(cv.data2d.begin(), cv.data2d.end());
  const double mn = *mn_it, mx = *mx_it;
  const double span = mx - mn;
  ImageU8 img(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = span > 0 ? (cv.at2d(i, j) - mn) / span : 0.0;
      img.at(i, j) = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  }
  return img;
}

}  // namespace ssorn::match
