#include "ssorn/geometry/homography.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ssorn::geo {

namespace {
constexpr double kInfinityTol = 1e-12;

std::string format_doubles(const double* v, int n) {
  std::string out;
  char buf[64];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    if (i) out += ' ';
    out += buf;
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, int expect) {
  std::istringstream is(s);
  std::vector<double> v;
  double d;
  while (is >> d) v.push_back(d);
  if (static_cast<int>(v.size()) != expect) {
    throw std::invalid_argument("expected " + std::to_string(expect) + " decimals, got " +
                                std::to_string(v.size()));
  }
  return v;
}
}  // namespace

CornerSet CornerSet::square(double side, const Vec2& origin) {
  CornerSet c;
  c.corners = {origin, origin + Vec2(side, 0), origin + Vec2(side, side), origin + Vec2(0, side)};
  return c;
}

CornerSet CornerSet::image_rect(int h, int w, const Vec2& origin) {
  CornerSet c;
  const double x1 = w - 1.0, y1 = h - 1.0;
  c.corners = {origin, origin + Vec2(x1, 0), origin + Vec2(x1, y1), origin + Vec2(0, y1)};
  return c;
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::normalized() const {
  const double s = m_(2, 2);
  if (std::abs(s) < kInfinityTol * m_.norm()) {
    throw SingularHomography("cannot normalize: bottom-right entry is ~0");
  }
  return Homography(m_ / s);
}

bool Homography::approx_equal(const Homography& o, double tol) const {
  const Eigen::Matrix3d a = normalized().matrix();
  const Eigen::Matrix3d b = o.normalized().matrix();
  return (a - b).cwiseAbs().maxCoeff() <= tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

Homography four_point_to_homography(const FourPointOffsets& offsets, const CornerSet& ref) {
  // Two rows per correspondence (x,y) -> (u,v):
  //   h0 x + h1 y + h2 - u h6 x - u h7 y = u
  //   h3 x + h4 y + h5 - v h6 x - v h7 y = v
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const Vec2& p = ref.corners[i];
    const Vec2 q = ref.corners[i] + offsets.offsets[i];
    a(2 * i, 0) = p.x();
    a(2 * i, 1) = p.y();
    a(2 * i, 2) = 1.0;
    a(2 * i, 6) = -q.x() * p.x();
    a(2 * i, 7) = -q.x() * p.y();
    b(2 * i) = q.x();
    a(2 * i + 1, 3) = p.x();
    a(2 * i + 1, 4) = p.y();
    a(2 * i + 1, 5) = 1.0;
    a(2 * i + 1, 6) = -q.y() * p.x();
    a(2 * i + 1, 7) = -q.y() * p.y();
    b(2 * i + 1) = q.y();
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) {
    throw DegenerateCorners("singular 4-point system (three collinear corners?)");
  }
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Eigen::Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return Homography(m);
}

Vec2 apply_homography(const Homography& h, const Vec2& point) {
  const Eigen::Vector3d q = h.matrix() * Eigen::Vector3d(point.x(), point.y(), 1.0);
  if (std::abs(q.z()) < kInfinityTol) {
    throw PointAtInfinity("projected point has ~zero homogeneous w");
  }
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

std::vector<Vec2> apply_homography(const Homography& h, const std::vector<Vec2>& points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(apply_homography(h, p));
  return out;
}

FourPointOffsets homography_to_four_point(const Homography& h, const CornerSet& ref) {
  FourPointOffsets o;
  for (int i = 0; i < 4; ++i) {
    o.offsets[i] = apply_homography(h, ref.corners[i]) - ref.corners[i];
  }
  return o;
}

Homography invert(const Homography& h) {
  const Eigen::Matrix3d& m = h.matrix();
  const double det = m.determinant();
  if (std::abs(det) < 1e-12 * std::pow(m.norm(), 3)) {
    throw SingularHomography("homography is not invertible");
  }
  return Homography(m.inverse()).normalized();
}

Homography compose(const Homography& h1, const Homography& h2) {
  return Homography(h1.matrix() * h2.matrix()).normalized();
}

ImageF warp_image(const ImageF& image, const Homography& h, int out_h, int out_w) {
  if (image.empty()) throw std::invalid_argument("warp_image: empty input");
  const Homography hinv = invert(h);
  const Eigen::Matrix3d& m = hinv.matrix();
  ImageF out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const double w = m(2, 0) * x + m(2, 1) * y + m(2, 2);
      if (std::abs(w) < kInfinityTol) {
        out.at(y, x) = 0.0;
        continue;
      }
      const double sx = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / w;
      const double sy = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / w;
      out.at(y, x) = sample_bilinear(image, sx, sy);
    }
  }
  return out;
}

ImageU8 warp_image(const ImageU8& image, const Homography& h, int out_h, int out_w) {
  return to_u8(warp_image(to_float(image), h, out_h, out_w));
}

double corner_error(const FourPointOffsets& pred, const FourPointOffsets& gt) {
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) acc += (pred.offsets[i] - gt.offsets[i]).norm();
  return acc / 4.0;
}

double mace(const std::vector<FourPointOffsets>& pred, const std::vector<FourPointOffsets>& gt) {
  if (pred.empty() || gt.empty()) throw EmptyInput("mace: empty input");
  if (pred.size() != gt.size()) throw std::invalid_argument("mace: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) acc += corner_error(pred[i], gt[i]);
  return acc / static_cast<double>(pred.size());
}

std::string to_string(const Homography& h) {
  double v[9];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v[r * 3 + c] = h.matrix()(r, c);
  return format_doubles(v, 9);
}

std::string to_string(const FourPointOffsets& o) {
  double v[8];
  for (int i = 0; i < 4; ++i) {
    v[2 * i] = o.offsets[i].x();
    v[2 * i + 1] = o.offsets[i].y();
  }
  return format_doubles(v, 8);
}

Homography homography_from_string(const std::string& s) {
  const auto v = parse_doubles(s, 9);
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = v[r * 3 + c];
  return Homography(m);
}

FourPointOffsets offsets_from_string(const std::string& s) {
  const auto v = parse_doubles(s, 8);
  FourPointOffsets o;
  for (int i = 0; i < 4; ++i) o.offsets[i] = Vec2(v[2 * i], v[2 * i + 1]);
  return o;
}

}  // namespace ssorn::geo
