#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "splatflow/core/error.hpp"
#include "splatflow/core/image.hpp"

namespace splatflow {

/// Dense row-major array of doubles. The leading dimension is the frame (or
/// sample) axis wherever a per-frame quantity is broadcast.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)), data(count(shape), fill) {}

  static size_t count(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), size_t{1}, [](size_t a, int b) { return a * static_cast<size_t>(b); });
  }
  size_t size() const { return data.size(); }
  int frames() const { return shape.empty() ? 0 : shape[0]; }
  size_t frame_size() const { return shape.empty() ? 0 : data.size() / static_cast<size_t>(shape[0]); }
  bool operator==(const Tensor&) const = default;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape != b.shape) throw ShapeMismatch(std::string(what) + ": tensor shapes differ");
}

/// Stacks HxWxC images into an [N, H, W, C] tensor.
Tensor stack_frames(const std::vector<ImageBuffer>& frames);
/// Inverse of stack_frames for a 4-d tensor.
std::vector<ImageBuffer> unstack_frames(const Tensor& t);

}  // namespace splatflow
