#include "ssorn/core/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace ssorn {

ImageF to_float(const ImageU8& img) {
  ImageF out(img.height(), img.width());
  for (size_t i = 0; i < img.size(); ++i) out.data()[i] = static_cast<double>(img.data()[i]);
  return out;
}

double clamp255(double v) { return std::min(255.0, std::max(0.0, v)); }

ImageU8 to_u8(const ImageF& img) {
  ImageU8 out(img.height(), img.width());
  for (size_t i = 0; i < img.size(); ++i) {
    out.data()[i] = static_cast<std::uint8_t>(std::lround(clamp255(img.data()[i])));
  }
  return out;
}

double sample_bilinear(const ImageF& img, double x, double y) {
  const int h = img.height(), w = img.width();
  if (x <= -1.0 || y <= -1.0 || x >= static_cast<double>(w) || y >= static_cast<double>(h)) {
    return 0.0;
  }
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto px = [&](int yy, int xx) -> double {
    if (xx < 0 || yy < 0 || xx >= w || yy >= h) return 0.0;
    return img.at(yy, xx);
  };
  const double v00 = px(y0, x0), v01 = px(y0, x0 + 1);
  const double v10 = px(y0 + 1, x0), v11 = px(y0 + 1, x0 + 1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
}

ImageF resize_bilinear(const ImageF& src, int out_h, int out_w) {
  if (src.empty() || out_h <= 0 || out_w <= 0) throw std::invalid_argument("bad resize");
  ImageF out(out_h, out_w);
  const double sy = static_cast<double>(src.height()) / out_h;
  const double sx = static_cast<double>(src.width()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    // Pixel-center mapping; clamp keeps samples inside the source so the
    // border is never zero-filled by the resize itself.
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(src.height() - 1));
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(src.width() - 1));
      out.at(y, x) = sample_bilinear(src, fx, fy);
    }
  }
  return out;
}

ImageF crop(const ImageF& src, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > src.height() || x0 + w > src.width()) {
    throw std::invalid_argument("crop out of bounds");
  }
  ImageF out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = src.at(y0 + y, x0 + x);
  return out;
}

ImageU8 read_image_gray(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw ImageIoError("cannot read image: " + path);
  cv::Mat gray;
  if (m.channels() == 1) {
    gray = m;
  } else {
    // BGR order in OpenCV; standard luminance weights.
    std::vector<cv::Mat> ch;
    cv::Mat f;
    m.convertTo(f, CV_64F);
    cv::split(f, ch);
    cv::Mat lum = 0.114 * ch[0] + 0.587 * ch[1] + 0.299 * ch[2];
    lum.convertTo(gray, CV_8U);
  }
  if (gray.depth() != CV_8U) {
    cv::Mat tmp;
    gray.convertTo(tmp, CV_8U);
    gray = tmp;
  }
  ImageU8 out(gray.rows, gray.cols);
  for (int y = 0; y < gray.rows; ++y)
    for (int x = 0; x < gray.cols; ++x) out.at(y, x) = gray.at<std::uint8_t>(y, x);
  return out;
}

void write_image_png(const std::string& path, const ImageU8& img) {
  if (img.empty()) throw ImageIoError("refusing to write empty image: " + path);
  cv::Mat m(img.height(), img.width(), CV_8U);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m.at<std::uint8_t>(y, x) = img.at(y, x);
  if (!cv::imwrite(path, m)) throw ImageIoError("cannot write image: " + path);
}

}  // namespace ssorn
