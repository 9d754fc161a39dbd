#include "splatflow/pipeline/refine.hpp"

#include <algorithm>
#include <random>

#include "splatflow/core/error.hpp"
#include "splatflow/nn/encoding.hpp"
#include "splatflow/nn/toy.hpp"
#include "splatflow/render/rasterizer.hpp"

namespace splatflow::pipeline {

plan::TargetPoseSet plan_targets(const GaussianScene& g_src, const std::vector<CameraView>& sources,
                                 const PlanConfig& cfg) {
  if (sources.empty()) throw EmptyViewSet("plan_targets: no sources");
  std::vector<CameraView> ordered = sources;
  std::stable_sort(ordered.begin(), ordered.end(), [](const CameraView& a, const CameraView& b) { return a.id < b.id; });
  std::vector<plan::TargetPose> cands;
  if (cfg.spline_targets > 0 && ordered.size() >= 2) {
    std::vector<CameraView> ctrl = ordered;
    if (cfg.closed_loop) ctrl.push_back(ordered.front());
    if (ctrl.size() >= 3) {
      const int n = cfg.spline_targets + (cfg.closed_loop ? 1 : 0);
      auto spl = plan::sample_spline_trajectory(ctrl, n);
      if (cfg.closed_loop) spl.poses.pop_back();
      for (auto& p : spl.poses) cands.push_back(p);
    }
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<Vec3> centres;
  for (const auto& s : sources) centres.push_back(s.center());
  for (int i = 0; i < cfg.sphere_targets; ++i) {
    const int n = static_cast<int>(ordered.size());
    const CameraView& ref = ordered[static_cast<size_t>(i) * n / std::max(1, cfg.sphere_targets)];
    cands.push_back(plan::sample_sphere_target(ref, centres, cfg.sphere, rng));
  }
  for (size_t i = 0; i < cands.size(); ++i) {
    CameraView& v = cands[i].view;
    v.intrinsics = sources.front().intrinsics;
    v.width = sources.front().width;
    v.height = sources.front().height;
    v.id = 100000 + static_cast<int>(i);
  }
  std::vector<Vec3> pts;
  for (const auto& g : g_src.primitives)
    if (g.opacity() >= cfg.min_point_opacity) pts.push_back(g.mean());
  plan::FrustumFilter f;
  f.near_threshold = pts.empty() ? 0.0 : plan::default_near_threshold(pts, sources);
  f.near_fraction_max = cfg.near_fraction_max;
  f.min_points_in_frustum = cfg.min_points_in_frustum;
  return plan::filter_target_poses(cands, pts, f);
}

ViewGenerator identity_generator() {
  return [](const GenerationRequest& r) { return r.rendering; };
}

ViewGenerator oracle_generator(const GaussianScene& gt) {
  return [gt](const GenerationRequest& r) { return render::rasterize(gt, r.target).color; };
}

flow::FlowBatch make_flow_item(const ImageBuffer& rendering, const ImageBuffer* gt, const CameraView& target,
                               const std::vector<CameraView>& refs, int latent_factor) {
  flow::FlowBatch b;
  const ImageBuffer z0 = nn::encode_latent(rendering, latent_factor);
  b.z0 = stack_frames({z0});
  b.z1 = gt ? stack_frames({nn::encode_latent(*gt, latent_factor)}) : Tensor(b.z0.shape, 0.0);
  std::vector<ImageBuffer> src;
  for (const auto& r : refs) src.push_back(nn::encode_latent(r.image, latent_factor));
  if (!src.empty()) b.cond.sources = stack_frames(src);
  std::vector<CameraView> frames{target};
  frames.insert(frames.end(), refs.begin(), refs.end());
  b.cond.raymaps = nn::raymap_stack(frames, frames[nn::reference_view(frames)], z0.height, z0.width);
  b.cond.indices = nn::default_indices(static_cast<int>(frames.size()));
  return b;
}

ViewGenerator flow_generator(const nn::VelocityModel& model, const std::vector<CameraView>& sources,
                             const FlowGlue& glue) {
  return [&model, sources, glue](const GenerationRequest& r) {
    std::vector<CameraView> refs;
    for (int i : r.reference_ids) refs.push_back(sources.at(i));
    const flow::FlowBatch b = make_flow_item(r.rendering, nullptr, r.target, refs, glue.latent_factor);
    const Tensor z = nn::integrate(model, b, glue.euler_steps);
    ImageBuffer delta = unstack_frames(z)[0];
    const ImageBuffer z0 = unstack_frames(b.z0)[0];
    for (size_t k = 0; k < delta.size(); ++k) delta.data[k] = 0.5 * (delta.data[k] - z0.data[k]);
    const ImageBuffer up = upsample(delta, glue.latent_factor);
    ImageBuffer out = r.rendering;
    for (size_t k = 0; k < out.size(); ++k) out.data[k] = std::clamp(out.data[k] + up.data[k], 0.0, 1.0);
    return out;
  };
}

std::vector<int> reference_sources(const std::vector<CameraView>& sources, const CameraView& target, int k) {
  k = std::min<int>(k, static_cast<int>(sources.size()));
  if (k <= 0) return {};
  return plan::select_reference_views(sources, {target}, k);
}

RefineResult refine_reconstruction(const GaussianScene& g_src, const std::vector<InputView>& sources,
                                   const ViewGenerator& generator, const RefineConfig& cfg) {
  std::vector<CameraView> cams;
  for (const auto& s : sources) cams.push_back(s.view);
  RefineResult res;
  res.targets = plan_targets(g_src, cams, cfg.plan);
  if (res.targets.poses.empty()) throw NoValidTargets("every planned target pose was filtered out");

  InitResult init = initialize_from_views(sources, cfg.recon);
  std::vector<SeedPoint> pts = init.points;
  for (const auto& t : res.targets.poses) {
    const auto out = render::rasterize(g_src, t.view);
    GenerationRequest req{t.view, out.color, reference_sources(cams, t.view, cfg.n_refs)};
    CameraView v = t.view;
    v.image = generator(req);
    if (!v.image.same_shape(out.color)) throw ShapeMismatch("generator returned a differently shaped image");
    if (cfg.reinit && cfg.recon.init == InitKind::Depth) {
      ImageBuffer depth = out.depth;
      for (size_t p = 0; p < depth.size(); ++p)
        if (out.alpha.data[p] < 0.5) depth.data[p] = 0.0;
      auto gp = unproject_depth(v, depth, cfg.recon.pixel_stride);
      pts.insert(pts.end(), gp.begin(), gp.end());
    }
    res.generated.push_back({v, cfg.target_loss ? opt::LossKind::Target : opt::LossKind::Source});
  }
  pts = voxel_dedup(pts, cfg.recon.voxel_size);
  const GaussianScene start = cfg.recon.init == InitKind::Depth
                                  ? scene_from_points(pts, cfg.recon.init_opacity, 0.5 * std::max(0.0, cfg.recon.voxel_size))
                                  : init.scene;

  std::vector<opt::TrainView> train;
  for (const auto& s : sources) train.push_back({s.view, opt::LossKind::Source});
  for (const auto& g : res.generated) train.push_back(g);
  opt::OptimizerConfig oc = cfg.recon.fit;
  if (cfg.recon.auto_spatial_scale) oc.spatial_lr_scale = camera_extent(cams);
  res.scene = opt::fit(start, train, oc, &res.log);
  return res;
}

}  // namespace splatflow::pipeline
