#pragma once

#include <random>
#include <vector>

#include "splatflow/core/gaussian.hpp"

namespace splatflow::testing {

/// Random scene inside [-extent, extent]^3 with moderate scales and opacities.
GaussianScene random_scene(uint64_t seed, int n, int sh_degree = 0, double extent = 1.0,
                           double log_scale_lo = -2.5, double log_scale_hi = -1.2);

/// Camera at distance `dist` on -z looking at the origin.
CameraView front_camera(int width, int height, double focal, double dist = 4.0);

/// Camera placed at `eye` looking at `target`.
CameraView look_camera(const Vec3& eye, const Vec3& target, int width, int height, double focal, int id = 0);

ImageBuffer random_image(uint64_t seed, int h, int w, int c, double lo = 0.0, double hi = 1.0);

Mat3 random_rotation(std::mt19937_64& rng);

/// `n` cameras on a ring of radius `dist` around the origin, slightly above
/// the equator, each carrying the rendering of `scene`.
std::vector<CameraView> ring_views(const GaussianScene& scene, int n, int width, int height, double focal,
                                   double dist = 4.0);

}  // namespace splatflow::testing
