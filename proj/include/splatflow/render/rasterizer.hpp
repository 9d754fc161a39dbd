#pragma once

#include <optional>
#include <vector>

#include "splatflow/core/gaussian.hpp"

namespace splatflow::render {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kLowPass = 0.3;
inline constexpr double kMinWeight = 1.0 / 255.0;
inline constexpr double kMaxWeight = 0.999;
inline constexpr double kMinTransmittance = 1e-4;

/// Screen-space footprint of one primitive.
struct Projected2DGaussian {
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();  // includes the 0.3 I low-pass
  Vec3 conic = Vec3::Zero();      // inverse of cov2d as (xx, xy, yy)
  double depth = 0.0;             // camera-frame z
  double opacity = 0.0;
  Vec3 rgb = Vec3::Zero();        // SH colour clamped to >= 0
  Vec3 rgb_raw = Vec3::Zero();    // before clamping
  Vec3 view_dir = Vec3::Zero();   // unit direction camera centre -> mean
  int source_index = -1;
};

/// Returns std::nullopt when the primitive is culled: camera-frame depth at or
/// below the near plane, or a 3σ footprint entirely outside the image.
std::optional<Projected2DGaussian> project_gaussian(const GaussianPrimitive& g, int sh_degree,
                                                    const CameraView& cam, int index = -1);

struct RenderSettings {
  int tile_size = 16;
  Vec3 background = Vec3::Zero();
  int workers = 0;  // 0: use worker_count()
};

struct RenderOutput {
  ImageBuffer color;  // HxWx3
  ImageBuffer alpha;  // HxW accumulated opacity
  ImageBuffer depth;  // HxW alpha-normalised expected depth, 0 where alpha == 0
  int visible_count = 0;
};

/// Front-to-back alpha compositing of the globally depth-sorted primitives
/// (ties broken by index). Per pixel, a contribution is skipped when its
/// weight is below 1/255, weights are clamped to 0.999, and compositing stops
/// once transmittance drops below 1e-4.
RenderOutput rasterize(const GaussianScene& scene, const CameraView& cam, const RenderSettings& settings = {});
RenderOutput rasterize(const GaussianScene& scene, const CameraView& cam, int tile_size);

/// Gradients for every primitive parameter, flat per parameter class.
struct SceneGradients {
  std::vector<double> position;       // 3K
  std::vector<double> log_scale;      // 3K
  std::vector<double> rotation;       // 4K
  std::vector<double> opacity_logit;  // K
  std::vector<double> sh;             // K * coeffs * 3
  // Densification statistics.
  std::vector<double> mean2d_grad_norm;  // |dL/dmean2d|
  std::vector<double> abs_grad;          // |sum over pixels of |dL/dmean2d per pixel||
  std::vector<double> radius;            // screen-space radius (3σ, pixels); 0 when culled
  std::vector<char> visible;

  void resize(size_t k, int sh_coeffs);
  void set_zero();
};

/// Adjoint of `rasterize` for upstream gradient dL/dcolor (HxWx3). The
/// per-pixel front-to-back lists are recomputed rather than stored.
SceneGradients rasterize_backward(const GaussianScene& scene, const CameraView& cam, const ImageBuffer& upstream,
                                  const RenderSettings& settings = {});

}  // namespace splatflow::render
