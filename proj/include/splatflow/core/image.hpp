#pragma once

#include <cassert>
#include <span>
#include <vector>

namespace splatflow {

/// Row-major HxWxC buffer of doubles. Values are never clamped internally;
/// clamping to [0,1] happens only when writing 8-bit files.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c = 0) {
    assert(y >= 0 && y < height && x >= 0 && x < width && c >= 0 && c < channels);
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    assert(y >= 0 && y < height && x >= 0 && x < width && c >= 0 && c < channels);
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  size_t size() const { return data.size(); }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
  bool empty() const { return data.empty(); }
  bool same_shape(const ImageBuffer& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  std::span<const double> view() const { return data; }
};

/// Throws ShapeMismatch when the two buffers differ in shape.
void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what);

/// Box-filter downsampling by an integer factor (H and W must be divisible).
ImageBuffer downsample(const ImageBuffer& img, int factor);

/// Nearest-neighbour upsampling by an integer factor; the adjoint of `downsample` up to 1/factor^2.
ImageBuffer upsample(const ImageBuffer& img, int factor);

}  // namespace splatflow
