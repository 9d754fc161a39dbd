#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "splatflow/core/gaussian.hpp"

namespace splatflow::pipeline {

enum class TrajectoryKind { Orbit, Spline };

struct SceneSetup {
  int primitives = 300;
  double scale_bias = 0.0;  // object log-scale offset
  TrajectoryKind trajectory = TrajectoryKind::Orbit;
  int views = 36;
  int width = 64;
  int height = 64;
  double focal = 77.0;
  double radius = 3.0;      // camera distance from the scene centre
  double elevation = 0.3;   // camera height as a fraction of the radius
  double depth_noise = 0.05;    // log-normal σ of the monocular depth stand-in
  double depth_scale = 1.7;     // unknown global scale of the monocular depths
  double track_fraction = 0.05; // share of foreground pixels with an exact sparse depth
};

/// Posed input view plus the depth cues used for initialisation.
struct InputView {
  CameraView view;
  ImageBuffer mono_depth;   // up-to-scale noisy depth, 0 where undefined
  ImageBuffer confidence;   // 0 where undefined
  ImageBuffer track_depth;  // sparse metric depth, 0 off-track
};

struct SyntheticScene {
  GaussianScene gt;
  std::vector<InputView> views;

  std::vector<CameraView> cameras() const;
  bool operator==(const SyntheticScene& o) const;
};

/// Seeded ground-truth scene, trajectory and depth cues. Noisy depth is the
/// rendered depth times depth_scale times exp(depth_noise N(0,1)), with
/// confidence 1 / (0.01 + |log noise|); pixels with rendered alpha < 0.5 get
/// no depth. Throws InvalidArgument for primitives < 1 or views < 1.
SyntheticScene generate_synthetic_scene(uint64_t seed, const SceneSetup& setup);

/// Directory layout: gt.splat, cameras.txt + view_<id>.ppm, mono_<id>.pfm,
/// conf_<id>.pfm, track_<id>.pfm.
void save_synthetic_scene(const SyntheticScene& s, const std::filesystem::path& dir);
SyntheticScene load_synthetic_scene(const std::filesystem::path& dir);

/// `count` indices spread evenly over [0, n): round(i n / count).
std::vector<int> equally_spaced(int n, int count);

/// Input/held-out view ids: `input_views` equally spaced views and the rest.
struct ViewSplit {
  std::vector<int> inputs;
  std::vector<int> held_out;
};
ViewSplit make_split(const SyntheticScene& scene, int input_views);

}  // namespace splatflow::pipeline
