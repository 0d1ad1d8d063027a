#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssorn {

// Single-channel raster, row-major, origin at the top-left pixel.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, T fill = T{})
      : h_(height), w_(width), data_(static_cast<size_t>(height) * width, fill) {
    if (height < 0 || width < 0) throw std::invalid_argument("negative raster size");
  }

  int height() const { return h_; }
  int width() const { return w_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& at(int y, int x) { return data_[static_cast<size_t>(y) * w_ + x]; }
  const T& at(int y, int x) const { return data_[static_cast<size_t>(y) * w_ + x]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Raster& o) const { return h_ == o.h_ && w_ == o.w_; }
  bool operator==(const Raster& o) const {
    return h_ == o.h_ && w_ == o.w_ && data_ == o.data_;
  }

 private:
  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

using ImageU8 = Raster<std::uint8_t>;
using ImageF = Raster<double>;

ImageF to_float(const ImageU8& img);

// Rounds to nearest and clamps to [0, 255].
ImageU8 to_u8(const ImageF& img);

double clamp255(double v);

// Bilinear sample with zero fill outside [0, w-1] x [0, h-1].
double sample_bilinear(const ImageF& img, double x, double y);

// Bilinear resize (arbitrary scale, pixel-center alignment).
ImageF resize_bilinear(const ImageF& src, int out_h, int out_w);

ImageF crop(const ImageF& src, int y0, int x0, int h, int w);

struct ImageIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reads any common image format, converting color inputs to grayscale with
// luminance weights (0.299, 0.587, 0.114).
ImageU8 read_image_gray(const std::string& path);

// Lossless 8-bit grayscale PNG.
void write_image_png(const std::string& path, const ImageU8& img);

}  // namespace ssorn
