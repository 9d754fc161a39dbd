#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "grad_check.hpp"
#include "naive_rasterizer.hpp"
#include "splatflow/render/rasterizer.hpp"

using namespace splatflow;
using namespace splatflow::render;

namespace {

GaussianPrimitive white_blob(const Vec3& pos, double log_scale, double opacity) {
  GaussianPrimitive g;
  g.position = {float(pos.x()), float(pos.y()), float(pos.z())};
  g.log_scale = {float(log_scale), float(log_scale), float(log_scale)};
  g.opacity_logit = float(logit(opacity));
  g.sh = {float(rgb_to_sh0(1.0)), float(rgb_to_sh0(1.0)), float(rgb_to_sh0(1.0))};
  return g;
}

CameraView axis_camera(int w, int h, double f) {
  // Identity pose: camera at origin looking along +z.
  return make_camera(Mat3::Identity(), Vec3::Zero(), Intrinsics{f, f, 8.0, 8.0, w, h});
}

double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("project_gaussian on-axis closed form") {
  const double f = 20.0, sigma = 0.05;
  const CameraView cam = axis_camera(17, 17, f);
  const auto g = white_blob(Vec3(0, 0, 1), std::log(sigma), 0.5);
  const auto p = project_gaussian(g, 0, cam);
  REQUIRE(p.has_value());
  CHECK(p->mean2d.x() == doctest::Approx(8.0));
  CHECK(p->mean2d.y() == doctest::Approx(8.0));
  const double expected = f * f * sigma * sigma + kLowPass;
  // log_scale is stored in float; compare with the float-rounded sigma
  const double s = std::exp(double(float(std::log(sigma))));
  CHECK(p->cov2d(0, 0) == doctest::Approx(f * f * s * s + kLowPass).epsilon(1e-12));
  CHECK(p->cov2d(1, 1) == doctest::Approx(f * f * s * s + kLowPass).epsilon(1e-12));
  CHECK(std::abs(p->cov2d(0, 1)) < 1e-12);
  CHECK(p->cov2d(0, 0) == doctest::Approx(expected).epsilon(1e-5));
  CHECK(p->depth == doctest::Approx(1.0));
}

TEST_CASE("project_gaussian culls primitives behind the camera or off screen") {
  const CameraView cam = axis_camera(17, 17, 20.0);
  CHECK_FALSE(project_gaussian(white_blob(Vec3(0, 0, -1), -3, 0.5), 0, cam).has_value());
  CHECK_FALSE(project_gaussian(white_blob(Vec3(0, 0, 0.005), -3, 0.5), 0, cam).has_value());
  CHECK_FALSE(project_gaussian(white_blob(Vec3(50, 0, 1), -3, 0.5), 0, cam).has_value());
}

TEST_CASE("project_gaussian mean shifts by f*eps/z") {
  const double f = 20.0, z = 2.0, eps = 1e-3;
  const CameraView cam = axis_camera(17, 17, f);
  const auto p0 = project_gaussian(white_blob(Vec3(0.1, 0.0, z), -3, 0.5), 0, cam);
  const auto p1 = project_gaussian(white_blob(Vec3(0.1 + eps, 0.0, z), -3, 0.5), 0, cam);
  REQUIRE(p0);
  REQUIRE(p1);
  const double actual_eps = double(float(0.1 + eps)) - double(float(0.1));
  CHECK((p1->mean2d.x() - p0->mean2d.x()) == doctest::Approx(f * actual_eps / z).epsilon(1e-9));
  CHECK(p1->mean2d.y() == doctest::Approx(p0->mean2d.y()));
}

TEST_CASE("single near-delta white Gaussian gives w = opacity at its pixel") {
  const CameraView cam = axis_camera(17, 17, 20.0);
  GaussianScene scene;
  scene.primitives.push_back(white_blob(Vec3(0, 0, 1), std::log(1e-4), 0.6));
  const auto out = rasterize(scene, cam);
  for (int c = 0; c < 3; ++c) CHECK(out.color.at(8, 8, c) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(out.alpha.at(8, 8) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(out.depth.at(8, 8) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("two overlapping Gaussians composite as c1 w1 + c2 w2 (1 - w1)") {
  const CameraView cam = axis_camera(17, 17, 20.0);
  GaussianScene scene;
  auto front = white_blob(Vec3(0, 0, 1), std::log(1e-4), 0.4);
  auto back = white_blob(Vec3(0, 0, 2), std::log(1e-4), 0.7);
  front.sh = {float(rgb_to_sh0(1.0)), 0.0f, 0.0f};
  back.sh = {0.0f, float(rgb_to_sh0(1.0)), 0.0f};
  scene.primitives = {back, front};  // order in the list must not matter
  const auto out = rasterize(scene, cam);
  CHECK(out.color.at(8, 8, 0) == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(out.color.at(8, 8, 1) == doctest::Approx(0.7 * 0.6).epsilon(1e-6));
  CHECK(out.color.at(8, 8, 2) == doctest::Approx(0.0));
}

TEST_CASE("tiled rasterizer matches the naive reference") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const GaussianScene scene = testing::random_scene(seed, 50, static_cast<int>(seed % 4));
    const CameraView cam = testing::front_camera(16, 16, 14.0, 3.5);
    for (int tile : {4, 16}) {
      const auto out = rasterize(scene, cam, tile);
      const auto ref = testing::naive_rasterize(scene, cam);
      CHECK(max_abs_diff(out.color, ref.color) < 1e-4);
      CHECK(max_abs_diff(out.alpha, ref.alpha) < 1e-4);
    }
  }
}

TEST_CASE("accumulated weights equal alpha and stay in [0,1]") {
  const GaussianScene scene = testing::random_scene(42, 80, 0);
  const CameraView cam = testing::front_camera(24, 20, 18.0, 3.5);
  // With a white background of 1 and black primitives, color = T, so alpha = 1 - color.
  GaussianScene black = scene;
  for (auto& g : black.primitives) std::fill(g.sh.begin(), g.sh.end(), 0.0f);
  RenderSettings s;
  s.background = Vec3(1, 1, 1);
  const auto out = rasterize(black, cam, s);
  for (size_t p = 0; p < out.alpha.size(); ++p) {
    CHECK(out.alpha.data[p] >= 0.0);
    CHECK(out.alpha.data[p] <= 1.0);
    CHECK(std::abs((1.0 - out.color.data[3 * p]) - out.alpha.data[p]) < 1e-6);
  }
  const auto colored = rasterize(scene, cam);
  for (double v : colored.color.data) CHECK(std::isfinite(v));
}

TEST_CASE("rendering is invariant to a global rigid transform") {
  std::mt19937_64 rng(5);
  const GaussianScene scene = testing::random_scene(8, 60, 2);
  const CameraView cam = testing::front_camera(20, 20, 16.0, 3.5);
  const auto ref = rasterize(scene, cam);
  const Mat3 R = testing::random_rotation(rng);
  const Vec3 t(0.3, -0.2, 0.5);
  GaussianScene moved = scene;
  const Eigen::Quaterniond qr(R);
  for (auto& g : moved.primitives) {
    const Vec3 p = R * g.mean() + t;
    for (int a = 0; a < 3; ++a) g.position[a] = float(p[a]);
    const Eigen::Quaterniond qg(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]);
    const Eigen::Quaterniond qn = qr * qg;
    g.rotation = {float(qn.w()), float(qn.x()), float(qn.y()), float(qn.z())};
    // rotate the SH lobe directions: only degree-0 is rotation invariant, so
    // this property is exercised on the view-independent part below
  }
  for (auto& g : moved.primitives) {
    for (size_t i = 3; i < g.sh.size(); ++i) g.sh[i] = 0.0f;
  }
  GaussianScene base = scene;
  for (auto& g : base.primitives) {
    for (size_t i = 3; i < g.sh.size(); ++i) g.sh[i] = 0.0f;
  }
  CameraView cam2 = cam;
  cam2.rotation = R * cam.rotation;
  cam2.translation = R * cam.translation + t;
  const auto a = rasterize(base, cam);
  const auto b = rasterize(moved, cam2);
  // float storage of the transformed parameters limits agreement
  CHECK(max_abs_diff(a.color, b.color) < 1e-5);
  (void)ref;
}

TEST_CASE("doubling resolution approximates 2x supersampling") {
  const GaussianScene scene = testing::random_scene(3, 40, 0, 1.0, -1.8, -1.0);
  const CameraView cam = testing::front_camera(16, 16, 14.0, 3.5);
  CameraView hi = cam;
  hi.width = 32;
  hi.height = 32;
  hi.intrinsics(0, 0) *= 2;
  hi.intrinsics(1, 1) *= 2;
  hi.intrinsics(0, 2) = 2 * cam.intrinsics(0, 2) + 0.5;
  hi.intrinsics(1, 2) = 2 * cam.intrinsics(1, 2) + 0.5;
  const auto lo_img = rasterize(scene, cam).color;
  const auto hi_img = downsample(rasterize(scene, hi).color, 2);
  double mean_abs = 0.0;
  for (size_t i = 0; i < lo_img.size(); ++i) mean_abs += std::abs(lo_img.data[i] - hi_img.data[i]);
  mean_abs /= lo_img.size();
  CHECK(mean_abs < 0.03);
}

TEST_CASE("backward with zero upstream gives zero gradients") {
  const GaussianScene scene = testing::random_scene(1, 30, 2);
  const CameraView cam = testing::front_camera(16, 16, 14.0, 3.5);
  const auto g = rasterize_backward(scene, cam, ImageBuffer(16, 16, 3));
  for (const auto* v : {&g.position, &g.log_scale, &g.rotation, &g.opacity_logit, &g.sh}) {
    for (double x : *v) CHECK(x == 0.0);
  }
}

TEST_CASE("single-Gaussian gradients match finite differences for L = sum of pixels") {
  const CameraView cam = testing::front_camera(16, 16, 14.0, 4.0);
  for (int degree = 0; degree <= 3; ++degree) {
    const GaussianScene scene = testing::smooth_scene(100 + degree, 1, degree, cam);
    const ImageBuffer ones(16, 16, 3, 1.0);
    const auto res = testing::check_render_gradients(scene, cam, ones);
    INFO("degree ", degree, " worst ", res.worst_param);
    CHECK(res.checked > 10);
    CHECK(res.worst_rel < 1e-3);
  }
}

TEST_CASE("20-primitive gradients match finite differences for random upstream") {
  const CameraView cam = testing::look_camera(Vec3(0.5, -0.3, -4.0), Vec3::Zero(), 16, 16, 14.0);
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const GaussianScene scene = testing::smooth_scene(200 + seed, 20, static_cast<int>(seed + 1), cam);
    const ImageBuffer up = testing::random_image(300 + seed, 16, 16, 3, -1.0, 1.0);
    const auto res = testing::check_render_gradients(scene, cam, up);
    INFO("worst ", res.worst_param);
    CHECK(res.checked > 200);
    CHECK(res.worst_rel < 5e-3);
  }
}

TEST_CASE("backward reports screen-space statistics for visible primitives") {
  const GaussianScene scene = testing::random_scene(9, 30, 0);
  const CameraView cam = testing::front_camera(16, 16, 14.0, 3.5);
  const ImageBuffer up = testing::random_image(1, 16, 16, 3, -1.0, 1.0);
  const auto g = rasterize_backward(scene, cam, up);
  for (size_t i = 0; i < scene.size(); ++i) {
    CHECK(g.abs_grad[i] >= g.mean2d_grad_norm[i] - 1e-12);
    if (!g.visible[i]) CHECK(g.abs_grad[i] == 0.0);
  }
}
