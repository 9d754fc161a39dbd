#pragma once

#include <cstdint>
#include <vector>

#include "splatflow/core/gaussian.hpp"

namespace splatflow::render {

struct SyntheticSceneConfig {
  int primitives = 200;
  int sh_degree = 0;
  double extent = 1.0;  // objects lie inside a ball of this radius
  int clusters = 0;     // 0: one cluster per 20 primitives, at least 3
  double ground_fraction = 0.3;  // share of primitives forming a textured floor below the objects
  double scale_bias = 0.0;       // added to every object log-scale; negative gives finer detail
};

/// Clustered scene of coloured anisotropic blobs, deterministic in `seed`.
GaussianScene make_synthetic_scene(const SyntheticSceneConfig& cfg, uint64_t seed);

/// `n` cameras on a circle of radius `radius` around the origin at height
/// -elevation * radius (image-up is -y), looking at the origin, starting at
/// `start_angle` and spanning `arc` radians.
std::vector<CameraView> orbit_cameras(int n, int width, int height, double focal, double radius,
                                      double elevation = 0.3, double start_angle = 0.0,
                                      double arc = 6.283185307179586);

/// Renders `scene` into each camera's image (black background).
void render_into(const GaussianScene& scene, std::vector<CameraView>& views);

}  // namespace splatflow::render
