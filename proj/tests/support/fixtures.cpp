#include "fixtures.hpp"

#include <cmath>
#include <numbers>

#include "splatflow/render/rasterizer.hpp"

namespace splatflow::testing {

GaussianScene random_scene(uint64_t seed, int n, int sh_degree, double extent, double log_scale_lo,
                           double log_scale_hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-extent, extent);
  std::uniform_real_distribution<double> ls(log_scale_lo, log_scale_hi);
  std::uniform_real_distribution<double> op(-1.5, 2.5);
  std::uniform_real_distribution<double> col(0.05, 0.95);
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::normal_distribution<double> hi_band(0.0, 0.3);
  GaussianScene scene;
  scene.sh_degree = sh_degree;
  const int nc = sh_coeff_count(sh_degree);
  for (int i = 0; i < n; ++i) {
    GaussianPrimitive g;
    for (auto& v : g.position) v = static_cast<float>(pos(rng));
    for (auto& v : g.log_scale) v = static_cast<float>(ls(rng));
    Eigen::Vector4d q(nrm(rng), nrm(rng), nrm(rng), nrm(rng));
    q.normalize();
    for (int a = 0; a < 4; ++a) g.rotation[a] = static_cast<float>(q[a]);
    g.opacity_logit = static_cast<float>(op(rng));
    g.sh.assign(nc * 3, 0.0f);
    for (int c = 0; c < 3; ++c) g.sh[c] = static_cast<float>(rgb_to_sh0(col(rng)));
    for (int b = 1; b < nc; ++b) {
      for (int c = 0; c < 3; ++c) g.sh[b * 3 + c] = static_cast<float>(hi_band(rng));
    }
    scene.primitives.push_back(std::move(g));
  }
  return scene;
}

CameraView look_camera(const Vec3& eye, const Vec3& target, int width, int height, double focal, int id) {
  Intrinsics intr{focal, focal, (width - 1) * 0.5, (height - 1) * 0.5, width, height};
  return make_camera(look_at_rotation(eye, target), eye, intr, id);
}

CameraView front_camera(int width, int height, double focal, double dist) {
  return look_camera(Vec3(0.0, 0.0, -dist), Vec3::Zero(), width, height, focal);
}

ImageBuffer random_image(uint64_t seed, int h, int w, int c, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ImageBuffer img(h, w, c);
  for (double& v : img.data) v = u(rng);
  return img;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> nrm(0.0, 1.0);
  Eigen::Quaterniond q(nrm(rng), nrm(rng), nrm(rng), nrm(rng));
  q.normalize();
  return q.toRotationMatrix();
}

std::vector<CameraView> ring_views(const GaussianScene& scene, int n, int width, int height, double focal,
                                   double dist) {
  std::vector<CameraView> views;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    const Vec3 eye(dist * std::sin(a), -0.3 * dist, -dist * std::cos(a));
    CameraView v = look_camera(eye, Vec3::Zero(), width, height, focal, i);
    v.image = render::rasterize(scene, v).color;
    views.push_back(std::move(v));
  }
  return views;
}

}  // namespace splatflow::testing
