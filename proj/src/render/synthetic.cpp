#include "splatflow/render/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "splatflow/render/rasterizer.hpp"

namespace splatflow::render {

GaussianScene make_synthetic_scene(const SyntheticSceneConfig& cfg, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int k = cfg.clusters > 0 ? cfg.clusters : std::max(3, cfg.primitives / 20);
  struct Cluster {
    Vec3 center;
    Vec3 color;
    double spread;
  };
  GaussianScene scene;
  scene.sh_degree = cfg.sh_degree;
  const int nc = sh_coeff_count(cfg.sh_degree);
  std::vector<Cluster> clusters;
  for (int c = 0; c < k; ++c) {
    Vec3 dir(nrm(rng), nrm(rng), nrm(rng));
    dir.normalize();
    const double r = 0.6 * cfg.extent * std::cbrt(uni(rng));
    clusters.push_back({dir * r, Vec3(0.15 + 0.7 * uni(rng), 0.15 + 0.7 * uni(rng), 0.15 + 0.7 * uni(rng)),
                        cfg.extent * (0.12 + 0.15 * uni(rng))});
  }
  const int ground = static_cast<int>(std::lround(cfg.ground_fraction * cfg.primitives));
  const int objects = cfg.primitives - ground;
  const Vec3 tile_a(0.85, 0.8, 0.7), tile_b(0.3, 0.35, 0.45);
  for (int i = 0; i < ground; ++i) {
    // flat floor splats on a jittered grid, coloured as a checkerboard
    GaussianPrimitive g;
    const int side = std::max(1, static_cast<int>(std::ceil(std::sqrt(ground))));
    const double cell = 2.8 * cfg.extent / side;
    const int gx = i % side, gz = i / side;
    const double x = (gx + 0.5) * cell - 1.4 * cfg.extent + 0.1 * cell * nrm(rng);
    const double z = (gz + 0.5) * cell - 1.4 * cfg.extent + 0.1 * cell * nrm(rng);
    g.position = {static_cast<float>(x), static_cast<float>(0.6 * cfg.extent), static_cast<float>(z)};
    g.log_scale = {static_cast<float>(std::log(0.6 * cell)), static_cast<float>(std::log(0.02 * cfg.extent)),
                   static_cast<float>(std::log(0.6 * cell))};
    g.opacity_logit = static_cast<float>(logit(0.9));
    g.sh.assign(nc * 3, 0.0f);
    const Vec3& col = ((gx + gz) % 2) ? tile_a : tile_b;
    for (int c = 0; c < 3; ++c) g.sh[c] = static_cast<float>(rgb_to_sh0(std::clamp(col[c] + 0.05 * nrm(rng), 0.02, 0.98)));
    scene.primitives.push_back(std::move(g));
  }
  for (int i = 0; i < objects; ++i) {
    const Cluster& cl = clusters[i % k];
    GaussianPrimitive g;
    const Vec3 p = cl.center + cl.spread * Vec3(nrm(rng), nrm(rng), nrm(rng));
    for (int a = 0; a < 3; ++a) {
      g.position[a] = static_cast<float>(p[a]);
      g.log_scale[a] = static_cast<float>(std::log(cfg.extent) - 2.4 + cfg.scale_bias + 0.8 * uni(rng));
    }
    Eigen::Vector4d q(nrm(rng), nrm(rng), nrm(rng), nrm(rng));
    q.normalize();
    for (int a = 0; a < 4; ++a) g.rotation[a] = static_cast<float>(q[a]);
    g.opacity_logit = static_cast<float>(logit(0.55 + 0.4 * uni(rng)));
    g.sh.assign(nc * 3, 0.0f);
    for (int c = 0; c < 3; ++c) {
      const double col = std::clamp(cl.color[c] + 0.08 * nrm(rng), 0.02, 0.98);
      g.sh[c] = static_cast<float>(rgb_to_sh0(col));
    }
    for (int b = 1; b < nc; ++b)
      for (int c = 0; c < 3; ++c) g.sh[b * 3 + c] = static_cast<float>(0.05 * nrm(rng));
    scene.primitives.push_back(std::move(g));
  }
  return scene;
}

std::vector<CameraView> orbit_cameras(int n, int width, int height, double focal, double radius, double elevation,
                                      double start_angle, double arc) {
  std::vector<CameraView> cams;
  const bool closed = std::abs(arc - 2.0 * std::numbers::pi) < 1e-9;
  for (int i = 0; i < n; ++i) {
    const double frac = closed ? double(i) / n : (n == 1 ? 0.0 : double(i) / (n - 1));
    const double a = start_angle + arc * frac;
    const Vec3 eye(radius * std::sin(a), -elevation * radius, -radius * std::cos(a));
    Intrinsics intr{focal, focal, (width - 1) * 0.5, (height - 1) * 0.5, width, height};
    cams.push_back(make_camera(look_at_rotation(eye, Vec3::Zero()), eye, intr, i));
  }
  return cams;
}

void render_into(const GaussianScene& scene, std::vector<CameraView>& views) {
  for (auto& v : views) v.image = rasterize(scene, v).color;
}

}  // namespace splatflow::render
