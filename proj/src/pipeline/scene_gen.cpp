#include "splatflow/pipeline/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "splatflow/core/error.hpp"
#include "splatflow/core/io.hpp"
#include "splatflow/plan/viewplan.hpp"
#include "splatflow/render/rasterizer.hpp"
#include "splatflow/render/synthetic.hpp"

namespace splatflow::pipeline {
namespace {

float f32(double v) { return static_cast<float>(v); }

std::vector<CameraView> spline_cameras(const SceneSetup& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const int nc = 8;
  std::vector<Vec3> ctrl;
  for (int i = 0; i <= nc; ++i) {
    // closed loop: the last control repeats the first
    const int k = i % nc;
    const double a = 2.0 * std::numbers::pi * k / nc;
    const double r = s.radius * (1.0 + (k == 0 ? 0.0 : 0.12 * uni(rng)));
    const double h = s.elevation * s.radius * (1.0 + (k == 0 ? 0.0 : 0.4 * uni(rng)));
    ctrl.emplace_back(r * std::sin(a), -h, -r * std::cos(a));
  }
  ctrl.back() = ctrl.front();
  Intrinsics intr{s.focal, s.focal, (s.width - 1) * 0.5, (s.height - 1) * 0.5, s.width, s.height};
  std::vector<CameraView> cams;
  for (int i = 0; i < s.views; ++i) {
    const Vec3 eye = plan::bspline_point(ctrl, static_cast<double>(i) / s.views);
    cams.push_back(make_camera(look_at_rotation(eye, Vec3::Zero()), eye, intr, i));
  }
  return cams;
}

}  // namespace

std::vector<CameraView> SyntheticScene::cameras() const {
  std::vector<CameraView> out;
  for (const auto& v : views) out.push_back(v.view);
  return out;
}

bool SyntheticScene::operator==(const SyntheticScene& o) const {
  if (!(gt == o.gt) || views.size() != o.views.size()) return false;
  for (size_t i = 0; i < views.size(); ++i) {
    const auto& a = views[i];
    const auto& b = o.views[i];
    if (a.view.rotation != b.view.rotation || a.view.translation != b.view.translation ||
        a.view.intrinsics != b.view.intrinsics || a.view.id != b.view.id || a.view.image.data != b.view.image.data ||
        a.mono_depth.data != b.mono_depth.data || a.confidence.data != b.confidence.data ||
        a.track_depth.data != b.track_depth.data)
      return false;
  }
  return true;
}

SyntheticScene generate_synthetic_scene(uint64_t seed, const SceneSetup& setup) {
  if (setup.primitives < 1) throw InvalidArgument("scene needs at least one primitive");
  if (setup.views < 1) throw InvalidArgument("scene needs at least one view");
  std::mt19937_64 rng(seed);
  SyntheticScene out;
  render::SyntheticSceneConfig sc;
  sc.primitives = setup.primitives;
  sc.scale_bias = setup.scale_bias;
  if (setup.primitives < 10) sc.ground_fraction = 0.0;
  out.gt = render::make_synthetic_scene(sc, rng());
  std::vector<CameraView> cams =
      setup.trajectory == TrajectoryKind::Orbit
          ? render::orbit_cameras(setup.views, setup.width, setup.height, setup.focal, setup.radius, setup.elevation)
          : spline_cameras(setup, rng);
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& cam : cams) {
    const auto r = render::rasterize(out.gt, cam);
    InputView v;
    cam.image = r.color;
    v.view = cam;
    const int h = cam.height, w = cam.width;
    v.mono_depth = ImageBuffer(h, w, 1);
    v.confidence = ImageBuffer(h, w, 1);
    v.track_depth = ImageBuffer(h, w, 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double n = setup.depth_noise * nrm(rng);
        const double keep = uni(rng);
        if (r.alpha.at(y, x) < 0.5) continue;
        const double d = r.depth.at(y, x);
        v.mono_depth.at(y, x) = f32(d * setup.depth_scale * std::exp(n));
        v.confidence.at(y, x) = f32(1.0 / (0.01 + std::abs(n)));
        if (keep < setup.track_fraction) v.track_depth.at(y, x) = f32(d);
      }
    out.views.push_back(std::move(v));
  }
  return out;
}

void save_synthetic_scene(const SyntheticScene& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_scene(s.gt, dir / "gt.splat");
  save_views(s.cameras(), dir);
  for (const auto& v : s.views) {
    const std::string id = std::to_string(v.view.id);
    write_pfm(v.mono_depth, dir / ("mono_" + id + ".pfm"));
    write_pfm(v.confidence, dir / ("conf_" + id + ".pfm"));
    write_pfm(v.track_depth, dir / ("track_" + id + ".pfm"));
  }
}

SyntheticScene load_synthetic_scene(const std::filesystem::path& dir) {
  SyntheticScene s;
  s.gt = load_scene(dir / "gt.splat");
  // images are re-rendered from the stored scene; the PPMs are 8-bit previews
  for (const auto& rec : read_camera_list(dir / "cameras.txt")) {
    InputView v;
    v.view = rec.view;
    const std::string id = std::to_string(v.view.id);
    v.mono_depth = read_pfm(dir / ("mono_" + id + ".pfm"));
    v.view.width = v.mono_depth.width;
    v.view.height = v.mono_depth.height;
    v.view.image = render::rasterize(s.gt, v.view).color;
    v.confidence = read_pfm(dir / ("conf_" + id + ".pfm"));
    v.track_depth = read_pfm(dir / ("track_" + id + ".pfm"));
    s.views.push_back(std::move(v));
  }
  return s;
}

std::vector<int> equally_spaced(int n, int count) {
  if (count <= 0 || n <= 0) return {};
  count = std::min(count, n);
  std::vector<int> out;
  for (int i = 0; i < count; ++i) out.push_back(static_cast<int>(std::lround(static_cast<double>(i) * n / count)));
  return out;
}

ViewSplit make_split(const SyntheticScene& scene, int input_views) {
  ViewSplit s;
  const auto pos = equally_spaced(static_cast<int>(scene.views.size()), input_views);
  for (size_t i = 0; i < scene.views.size(); ++i) {
    const bool in = std::find(pos.begin(), pos.end(), static_cast<int>(i)) != pos.end();
    (in ? s.inputs : s.held_out).push_back(scene.views[i].view.id);
  }
  return s;
}

}  // namespace splatflow::pipeline
