#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "splatflow/render/rasterizer.hpp"

namespace splatflow::opt {

struct LearningRates {
  double position = 1.6e-4;  // multiplied by spatial_lr_scale, decays exponentially
  double position_final = 1.6e-6;
  double log_scale = 5e-3;
  double rotation = 1e-3;
  double opacity = 5e-2;
  double sh_dc = 2.5e-3;
  double sh_rest = 2.5e-3 / 20.0;
};

struct OptimizerConfig {
  int total_steps = 5000;
  int warmup_steps = 200;
  int adc_stop_step = 2500;  // 0 disables density control
  int adc_interval = 100;
  LearningRates lr;
  double spatial_lr_scale = 1.0;
  double ssim_weight = 0.2;
  double tgt_ssim_weight = 0.02;
  double lpips_weight = 0.02;
  // AbsGrad threshold on the view-averaged accumulated |dL/dmean2d|, measured
  // in normalised device units (pixels * max(W, H) / 2).
  double densify_grad_threshold = 0.0008;
  double prune_opacity = 0.005;
  double max_screen_size = 0.0;  // split anything wider than this (pixels); 0 disables
  double percent_dense = 0.01;   // clone below this fraction of spatial_lr_scale, split above
  double split_factor = 1.6;
  int max_primitives = 50000;
  int log_interval = 100;
  uint64_t seed = 0;
  int workers = 0;

  /// Throws InvalidArgument on inconsistent schedules or weights outside [0, 1].
  void validate() const;
};

/// Per-primitive density-control accumulators.
struct AdcStats {
  std::vector<double> max_grad;  // running max of |dL/dmean2d|
  std::vector<double> abs_grad;  // accumulated AbsGrad (NDC units)
  std::vector<int> count;        // views in which the primitive was visible
  std::vector<double> max_radius;

  void resize(size_t k);
  void reset();
  void accumulate(const render::SceneGradients& g, const CameraView& cam);
};

/// Adaptive-moment optimiser over every primitive parameter. State is stored
/// per primitive so density control can copy and drop rows. Primitives that
/// were not visible in a step keep their parameters and moments unchanged.
class SceneAdam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-15;

  SceneAdam() = default;
  explicit SceneAdam(const GaussianScene& scene);

  static int stride(int sh_degree) { return 11 + 3 * sh_coeff_count(sh_degree); }

  /// One update; `position_lr` overrides cfg.position for the schedule.
  void step(GaussianScene& scene, const render::SceneGradients& g, const LearningRates& lr, double position_lr);

  /// Rebuilds the state: row i copies old row origin[i], or starts at zero when origin[i] < 0.
  void remap(const std::vector<long>& origin);

  size_t size() const { return rows_; }
  int steps() const { return t_; }

 private:
  int stride_ = 0;
  size_t rows_ = 0;
  int t_ = 0;
  std::vector<double> m_, v_;
};

struct AdcEvent {
  int cloned = 0;
  int split = 0;
  int pruned = 0;
};

/// Clone, split and prune using the accumulated statistics, then reset them.
/// Clones duplicate the parent and both copies take opacity 1 - sqrt(1 - α),
/// so the composite of the pair matches the parent at its centre. Splits
/// replace the parent with two children sampled from N(μ, Σ) with scales
/// divided by cfg.split_factor.
AdcEvent densify_and_prune(GaussianScene& scene, AdcStats& stats, SceneAdam& adam, const OptimizerConfig& cfg,
                           std::mt19937_64& rng);

/// Clone a single primitive with opacity compensation (exposed for testing).
void clone_primitive(GaussianScene& scene, size_t index);

}  // namespace splatflow::opt
