#include "splatflow/core/tensor.hpp"

#include <algorithm>

namespace splatflow {

Tensor stack_frames(const std::vector<ImageBuffer>& frames) {
  if (frames.empty()) throw ShapeMismatch("stack_frames: no frames");
  const auto& f0 = frames.front();
  Tensor t({static_cast<int>(frames.size()), f0.height, f0.width, f0.channels});
  for (size_t i = 0; i < frames.size(); ++i) {
    require_same_shape(frames[i], f0, "stack_frames");
    std::copy(frames[i].data.begin(), frames[i].data.end(), t.data.begin() + i * f0.size());
  }
  return t;
}

std::vector<ImageBuffer> unstack_frames(const Tensor& t) {
  if (t.shape.size() != 4) throw ShapeMismatch("unstack_frames: expected [N, H, W, C]");
  std::vector<ImageBuffer> out;
  const size_t fs = t.frame_size();
  for (int i = 0; i < t.frames(); ++i) {
    ImageBuffer img(t.shape[1], t.shape[2], t.shape[3]);
    std::copy_n(t.data.begin() + i * fs, fs, img.data.begin());
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace splatflow
