#include "splatflow/nn/encoding.hpp"

#include <cmath>
#include <limits>

#include "splatflow/nn/autodiff.hpp"

namespace splatflow::nn {

std::vector<double> sinusoidal_encoding(double x, int dim) {
  if (dim <= 0 || dim % 2) throw InvalidArgument("sinusoidal_encoding: dim must be positive and even");
  std::vector<double> e(dim);
  for (int k = 0; k < dim / 2; ++k) {
    const double w = std::pow(10000.0, -2.0 * k / dim);
    e[2 * k] = std::sin(x * w);
    e[2 * k + 1] = std::cos(x * w);
  }
  return e;
}

std::vector<double> view_index_encoding(int i, int dim) {
  if (i < 0 || i > 1000000) throw InvalidArgument("view_index_encoding: index out of range");
  return sinusoidal_encoding(static_cast<double>(i), dim);
}

Tensor positional_encoding_2d(int ph, int pw, int dim) {
  if (dim % 4) throw InvalidArgument("positional_encoding_2d: dim must be a multiple of 4");
  Tensor t({ph * pw, dim});
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      const auto ey = sinusoidal_encoding(y, dim / 2);
      const auto ex = sinusoidal_encoding(x, dim / 2);
      double* row = &t.data[static_cast<size_t>(y * pw + x) * dim];
      std::copy(ey.begin(), ey.end(), row);
      std::copy(ex.begin(), ex.end(), row + dim / 2);
    }
  }
  return t;
}

ImageBuffer compute_raymap(const CameraView& view_i, const CameraView& ref_j, int height, int width) {
  const double sx = static_cast<double>(width) / view_i.width;
  const double sy = static_cast<double>(height) / view_i.height;
  const Intrinsics in = view_i.intr();
  const double fx = in.fx * sx, fy = in.fy * sy;
  const double cx = (in.cx + 0.5) * sx - 0.5, cy = (in.cy + 0.5) * sy - 0.5;
  const Mat3 rj_t = ref_j.rotation.transpose();
  const Vec3 o = rj_t * (view_i.translation - ref_j.translation);
  const Mat3 rot = rj_t * view_i.rotation;
  ImageBuffer r(height, width, 6);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 d = (rot * Vec3((x - cx) / fx, (y - cy) / fy, 1.0)).normalized();
      const Vec3 m = o.cross(d);
      for (int a = 0; a < 3; ++a) {
        r.at(y, x, a) = m[a];
        r.at(y, x, 3 + a) = d[a];
      }
    }
  }
  return r;
}

int reference_view(const std::vector<CameraView>& views) {
  if (views.empty()) throw InvalidArgument("reference_view: no views");
  Vec3 mean = Vec3::Zero();
  for (const auto& v : views) mean += v.center();
  mean /= static_cast<double>(views.size());
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < views.size(); ++i) {
    const double d = (views[i].center() - mean).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Tensor raymap_stack(const std::vector<CameraView>& views, const CameraView& ref, int height, int width) {
  std::vector<ImageBuffer> maps;
  for (const auto& v : views) maps.push_back(compute_raymap(v, ref, height, width));
  return stack_frames(maps);
}

Tensor patchify(const Tensor& x) {
  NoGradGuard ng;
  return to_tensor(patchify(constant(x)));
}

Tensor unpatchify(const Tensor& tokens, int frames, int height, int width, int channels) {
  NoGradGuard ng;
  return to_tensor(unpatchify(constant(tokens), frames, height, width, channels));
}

}  // namespace splatflow::nn
