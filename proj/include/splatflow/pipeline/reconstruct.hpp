#pragma once

#include <vector>

#include "splatflow/opt/fit.hpp"
#include "splatflow/pipeline/scene_gen.hpp"

namespace splatflow::pipeline {

enum class InitKind { Depth, Random };

struct ReconConfig {
  opt::OptimizerConfig fit;
  InitKind init = InitKind::Depth;
  int pixel_stride = 2;       // unproject every n-th pixel in x and y
  double voxel_size = 0.03;   // dedup grid; <= 0 keeps every point
  int k_neighbors = 2;        // covisibility graph
  double init_opacity = 0.1;
  int random_points = 2000;   // InitKind::Random
  bool auto_spatial_scale = true;  // spatial_lr_scale from the camera spread
};

/// Coloured 3D point with the footprint of the pixel it came from.
struct SeedPoint {
  Vec3 position;
  Vec3 color;
  double footprint = 0.0;
};

/// Back-projects pixels with positive depth through a camera; colours come
/// from `image` when given (otherwise the camera's image).
std::vector<SeedPoint> unproject_depth(const CameraView& cam, const ImageBuffer& depth, int stride,
                                       const ImageBuffer* image = nullptr);

/// Keeps the first point in every voxel of side `voxel`, in input order. voxel <= 0 keeps all.
std::vector<SeedPoint> voxel_dedup(const std::vector<SeedPoint>& pts, double voxel);

/// Isotropic primitives at the points with the given opacity.
GaussianScene scene_from_points(const std::vector<SeedPoint>& pts, double opacity, double min_scale);

/// 1.1 x the largest distance of a camera centre from their mean (the usual
/// 3DGS scene extent), at least 1.
double camera_extent(const std::vector<CameraView>& cams);

struct InitResult {
  GaussianScene scene;
  double beta = 1.0;             // monocular depth = beta x metric depth
  std::vector<int> keyframes;    // view ids
  std::vector<SeedPoint> points; // after dedup
  size_t raw_points = 0;
};

/// Covisibility keyframes, metric scale from the sparse track depths, then
/// keyframe unprojection of the rescaled monocular depth and voxel dedup.
InitResult initialize_from_views(const std::vector<InputView>& views, const ReconConfig& cfg);

struct ReconResult {
  GaussianScene scene;
  InitResult init;
  opt::FitLog log;
};

/// Initialisation plus a source-loss fit on the views. Throws InvalidArgument for fewer than 2 views.
ReconResult initial_reconstruction(const std::vector<InputView>& views, const ReconConfig& cfg);

/// Subset of views by id.
std::vector<InputView> select_views(const std::vector<InputView>& all, const std::vector<int>& ids);

}  // namespace splatflow::pipeline
