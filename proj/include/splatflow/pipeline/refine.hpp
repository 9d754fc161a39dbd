#pragma once

#include <functional>
#include <vector>

#include "splatflow/flow/flow.hpp"
#include "splatflow/nn/model.hpp"
#include "splatflow/pipeline/reconstruct.hpp"
#include "splatflow/plan/viewplan.hpp"

namespace splatflow::pipeline {

struct PlanConfig {
  int spline_targets = 12;
  int sphere_targets = 8;
  bool closed_loop = true;  // the spline returns to the first source
  plan::SphereSampling sphere;
  double near_fraction_max = 0.3;
  int min_points_in_frustum = 50;
  double min_point_opacity = 0.2;  // primitives used as the filter's point cloud
  uint64_t seed = 0;
};

/// Spline targets through the sources in id order plus sphere targets
/// around evenly chosen sources, filtered against the reconstruction's
/// primitive centres. Targets get ids from 100000 up.
plan::TargetPoseSet plan_targets(const GaussianScene& g_src, const std::vector<CameraView>& sources,
                                 const PlanConfig& cfg);

struct GenerationRequest {
  CameraView target;
  ImageBuffer rendering;         // current reconstruction at the target
  std::vector<int> reference_ids;  // positions in the source list
};

using ViewGenerator = std::function<ImageBuffer(const GenerationRequest&)>;

/// Returns the rendering unchanged.
ViewGenerator identity_generator();
/// Renders the ground-truth scene at the target.
ViewGenerator oracle_generator(const GaussianScene& gt);

struct FlowGlue {
  int latent_factor = 4;
  int euler_steps = 20;
};

/// Conditioning for one target: z0 = latent of `rendering`, z1 = latent of
/// `gt` (zeros when null), clean latents of the reference views, ray maps
/// relative to the central frame, default indices.
flow::FlowBatch make_flow_item(const ImageBuffer& rendering, const ImageBuffer* gt, const CameraView& target,
                               const std::vector<CameraView>& refs, int latent_factor);

/// Integrates the model from the rendering's latent and adds the upsampled
/// latent change to the full-resolution rendering, clamped to [0, 1].
ViewGenerator flow_generator(const nn::VelocityModel& model, const std::vector<CameraView>& sources,
                             const FlowGlue& glue);

/// Closest sources to `target` in (position, look direction): k-means with
/// one point reduces to ranking by distance.
std::vector<int> reference_sources(const std::vector<CameraView>& sources, const CameraView& target, int k);

struct RefineConfig {
  PlanConfig plan;
  ReconConfig recon;   // schedule and initialisation of the refined fit
  int n_refs = 2;
  bool target_loss = true;  // generated views use loss_tgt; false: loss_gs
  bool reinit = true;       // add unprojections of generated views to the initial points
};

struct RefineResult {
  GaussianScene scene;
  plan::TargetPoseSet targets;
  std::vector<opt::TrainView> generated;
  opt::FitLog log;
};

/// Plans targets, generates their images from renderings of g_src, then fits
/// a fresh reconstruction on sources (loss_gs) and generated views (loss_tgt).
/// Keyframes come from the sources only. Throws NoValidTargets when every
/// planned pose is filtered out.
RefineResult refine_reconstruction(const GaussianScene& g_src, const std::vector<InputView>& sources,
                                   const ViewGenerator& generator, const RefineConfig& cfg);

}  // namespace splatflow::pipeline
