#include "splatflow/pipeline/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "splatflow/core/error.hpp"
#include "splatflow/opt/scale_align.hpp"
#include "splatflow/plan/viewplan.hpp"

namespace splatflow::pipeline {

std::vector<SeedPoint> unproject_depth(const CameraView& cam, const ImageBuffer& depth, int stride,
                                       const ImageBuffer* image) {
  if (stride < 1) throw InvalidArgument("pixel stride must be >= 1");
  const ImageBuffer& img = image ? *image : cam.image;
  const Intrinsics k = cam.intr();
  std::vector<SeedPoint> out;
  for (int y = 0; y < depth.height; y += stride)
    for (int x = 0; x < depth.width; x += stride) {
      const double d = depth.at(y, x);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      const Vec3 pc((x - k.cx) / k.fx * d, (y - k.cy) / k.fy * d, d);
      SeedPoint p;
      p.position = cam.rotation * pc + cam.translation;
      p.color = Vec3(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      p.footprint = d * stride / k.fx;
      out.push_back(p);
    }
  return out;
}

std::vector<SeedPoint> voxel_dedup(const std::vector<SeedPoint>& pts, double voxel) {
  if (!(voxel > 0.0)) return pts;
  std::set<std::tuple<long, long, long>> seen;
  std::vector<SeedPoint> out;
  for (const auto& p : pts) {
    const auto key = std::make_tuple(static_cast<long>(std::floor(p.position.x() / voxel)),
                                     static_cast<long>(std::floor(p.position.y() / voxel)),
                                     static_cast<long>(std::floor(p.position.z() / voxel)));
    if (seen.insert(key).second) out.push_back(p);
  }
  return out;
}

GaussianScene scene_from_points(const std::vector<SeedPoint>& pts, double opacity, double min_scale) {
  GaussianScene s;
  for (const auto& p : pts) {
    GaussianPrimitive g;
    const double sc = std::max(p.footprint, min_scale);
    for (int a = 0; a < 3; ++a) {
      g.position[a] = static_cast<float>(p.position[a]);
      g.log_scale[a] = static_cast<float>(std::log(sc));
    }
    g.opacity_logit = static_cast<float>(logit(opacity));
    g.sh.resize(3);
    for (int c = 0; c < 3; ++c) g.sh[c] = static_cast<float>(rgb_to_sh0(std::clamp(p.color[c], 0.0, 1.0)));
    s.primitives.push_back(std::move(g));
  }
  return s;
}

double camera_extent(const std::vector<CameraView>& cams) {
  if (cams.empty()) return 1.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& c : cams) mean += c.center();
  mean /= static_cast<double>(cams.size());
  double r = 0.0;
  for (const auto& c : cams) r = std::max(r, (c.center() - mean).norm());
  return std::max(1.0, 1.1 * r);
}

std::vector<InputView> select_views(const std::vector<InputView>& all, const std::vector<int>& ids) {
  std::vector<InputView> out;
  for (int id : ids) {
    auto it = std::find_if(all.begin(), all.end(), [&](const InputView& v) { return v.view.id == id; });
    if (it == all.end()) throw InvalidArgument("unknown view id " + std::to_string(id));
    out.push_back(*it);
  }
  return out;
}

InitResult initialize_from_views(const std::vector<InputView>& views, const ReconConfig& cfg) {
  if (views.size() < 2) throw InvalidArgument("reconstruction needs at least two views");
  InitResult res;
  std::vector<CameraView> cams;
  for (const auto& v : views) cams.push_back(v.view);
  const auto graph = plan::build_covis_graph(cams, cfg.k_neighbors);
  res.keyframes = graph.keyframes;

  if (cfg.init == InitKind::Random) {
    std::mt19937_64 rng(cfg.fit.seed + 17);
    std::uniform_real_distribution<double> u(-1.0, 1.0), c(0.0, 1.0);
    // box around the point the cameras look at
    std::vector<SeedPoint> pts;
    for (int i = 0; i < cfg.random_points; ++i)
      pts.push_back({Vec3(1.3 * u(rng), 1.3 * u(rng), 1.3 * u(rng)), Vec3(c(rng), c(rng), c(rng)), 0.05});
    res.raw_points = pts.size();
    res.points = pts;
    res.scene = scene_from_points(pts, cfg.init_opacity, 0.0);
    return res;
  }

  std::vector<ImageBuffer> track, mono, conf;
  for (const auto& v : views) {
    track.push_back(v.track_depth);
    mono.push_back(v.mono_depth);
    conf.push_back(v.confidence);
  }
  res.beta = opt::align_metric_scale(track, mono, conf);
  std::vector<SeedPoint> pts;
  for (int id : res.keyframes) {
    const auto& v = *std::find_if(views.begin(), views.end(), [&](const InputView& x) { return x.view.id == id; });
    ImageBuffer metric = v.mono_depth;
    for (double& d : metric.data) d /= res.beta;
    auto p = unproject_depth(v.view, metric, cfg.pixel_stride);
    pts.insert(pts.end(), p.begin(), p.end());
  }
  res.raw_points = pts.size();
  res.points = voxel_dedup(pts, cfg.voxel_size);
  res.scene = scene_from_points(res.points, cfg.init_opacity, 0.5 * std::max(0.0, cfg.voxel_size));
  return res;
}

ReconResult initial_reconstruction(const std::vector<InputView>& views, const ReconConfig& cfg) {
  ReconResult r;
  r.init = initialize_from_views(views, cfg);
  opt::OptimizerConfig oc = cfg.fit;
  std::vector<CameraView> cams;
  std::vector<opt::TrainView> tv;
  for (const auto& v : views) {
    cams.push_back(v.view);
    tv.push_back({v.view, opt::LossKind::Source});
  }
  if (cfg.auto_spatial_scale) oc.spatial_lr_scale = camera_extent(cams);
  r.scene = opt::fit(r.init.scene, tv, oc, &r.log);
  return r;
}

}  // namespace splatflow::pipeline
