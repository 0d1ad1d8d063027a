#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssorn/core/image.hpp"

namespace ssorn::geo {

struct DegenerateCorners : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PointAtInfinity : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularHomography : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vec2 = Eigen::Vector2d;

// Corner order is fixed everywhere: top-left, top-right, bottom-right,
// bottom-left.
struct CornerSet {
  std::array<Vec2, 4> corners;

  // Axis-aligned square with the given side length, top-left at origin.
  static CornerSet square(double side, const Vec2& origin = Vec2::Zero());

  // Pixel-center corners of an h x w raster: (0,0) .. (w-1,h-1).
  static CornerSet image_rect(int h, int w, const Vec2& origin = Vec2::Zero());
};

struct FourPointOffsets {
  // Per-corner (dx, dy) displacements in pixels, same corner order.
  std::array<Vec2, 4> offsets{Vec2::Zero(), Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};

  bool operator==(const FourPointOffsets& o) const {
    for (int i = 0; i < 4; ++i)
      if (offsets[i] != o.offsets[i]) return false;
    return true;
  }
};

class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Homography(const Eigen::Matrix3d& m) : m_(m) {}

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);

  const Eigen::Matrix3d& matrix() const { return m_; }
  Eigen::Matrix3d& matrix() { return m_; }

  // Scale so the bottom-right entry equals 1.
  Homography normalized() const;

  bool approx_equal(const Homography& o, double tol) const;

 private:
  Eigen::Matrix3d m_;
};

// DLT from the 4 reference->reference+offset correspondences, solved as an
// exact 8x8 linear system. Result is normalized (bottom-right entry 1).
Homography four_point_to_homography(const FourPointOffsets& offsets, const CornerSet& ref);

FourPointOffsets homography_to_four_point(const Homography& h, const CornerSet& ref);

std::vector<Vec2> apply_homography(const Homography& h, const std::vector<Vec2>& points);
Vec2 apply_homography(const Homography& h, const Vec2& point);

Homography invert(const Homography& h);

// compose(h1, h2) applies h2 first: x -> h1(h2(x)).
Homography compose(const Homography& h1, const Homography& h2);

// Output pixel (x, y) is sampled from the input at H^-1 (x, y) with bilinear
// interpolation; sources outside the input fill with 0.
ImageF warp_image(const ImageF& image, const Homography& h, int out_h, int out_w);
ImageU8 warp_image(const ImageU8& image, const Homography& h, int out_h, int out_w);

// Mean Average Corner Error over a batch, in pixels.
double mace(const std::vector<FourPointOffsets>& pred, const std::vector<FourPointOffsets>& gt);

// Per-sample average corner error (mean over the 4 corners).
double corner_error(const FourPointOffsets& pred, const FourPointOffsets& gt);

// Wire formats: 9 row-major decimals for a homography, 8 decimals for
// offsets (TL.x TL.y TR.x TR.y BR.x BR.y BL.x BL.y). Round-trip exact.
std::string to_string(const Homography& h);
std::string to_string(const FourPointOffsets& o);
Homography homography_from_string(const std::string& s);
FourPointOffsets offsets_from_string(const std::string& s);

}  // namespace ssorn::geo
