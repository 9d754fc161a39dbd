#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "splatflow/core/error.hpp"
#include "splatflow/opt/fit.hpp"
#include "splatflow/opt/scale_align.hpp"

using namespace splatflow;
using namespace splatflow::opt;

namespace {

ImageBuffer constant_image(int h, int w, double v) { return ImageBuffer(h, w, 3, v); }

ImageBuffer checkerboard(int h, int w) {
  ImageBuffer img(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = ((x + y) % 2) ? 1.0 : 0.0;
  return img;
}

GaussianScene perturbed(const GaussianScene& gt, uint64_t seed, double pos_noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> col(0.2, 0.8);
  GaussianScene s = gt;
  for (auto& g : s.primitives) {
    for (auto& p : g.position) p = static_cast<float>(p + pos_noise * n(rng));
    for (auto& l : g.log_scale) l = static_cast<float>(l + 0.2 * n(rng));
    g.opacity_logit = 0.0f;
    for (int c = 0; c < 3; ++c) g.sh[c] = static_cast<float>(rgb_to_sh0(col(rng)));
  }
  return s;
}

std::vector<TrainView> as_sources(const std::vector<CameraView>& views) {
  std::vector<TrainView> out;
  for (const auto& v : views) out.push_back({v, LossKind::Source});
  return out;
}

}  // namespace

TEST_CASE("ssim basic identities") {
  const auto a = testing::random_image(1, 20, 24, 3);
  const auto b = testing::random_image(2, 20, 24, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  CHECK(ssim(a, b) <= 1.0);
  CHECK(ssim(a, b) >= -1.0);
  const auto cb = checkerboard(16, 16);
  ImageBuffer inv = cb;
  for (double& v : inv.data) v = 1.0 - v;
  CHECK(ssim(cb, inv) < 0.0);
  CHECK(ssim(cb, inv) == doctest::Approx(testing::ssim_direct(cb, inv)).epsilon(1e-10));
  CHECK_THROWS_AS(ssim(a, ImageBuffer(20, 23, 3)), ShapeMismatch);
}

TEST_CASE("ssim matches the direct windowed oracle") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = testing::random_image(10 + seed, 13 + seed, 17, 3);
    const auto b = testing::random_image(20 + seed, 13 + seed, 17, 3);
    CHECK(ssim(a, b) == doctest::Approx(testing::ssim_direct(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("ssim gradient matches finite differences") {
  const auto a = testing::random_image(3, 12, 14, 3);
  const auto b = testing::random_image(4, 12, 14, 3);
  ImageBuffer g;
  ssim(a, b, &g);
  double worst = 0.0, gmax = 0.0;
  for (double v : g.data) gmax = std::max(gmax, std::abs(v));
  for (size_t i = 0; i < a.size(); ++i) {
    auto f = [&](double x) {
      ImageBuffer p = a;
      p.data[i] = x;
      return ssim(p, b);
    };
    const double fd = testing::central_diff(f, a.data[i], 1e-5);
    worst = std::max(worst, testing::rel_err(g.data[i], fd, 1e-3 * gmax));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("loss_gs closed forms") {
  OptimizerConfig cfg;
  const auto gt = testing::random_image(5, 16, 16, 3);
  CHECK(loss_gs(gt, gt, cfg) == doctest::Approx(0.0).epsilon(1e-12));
  const auto c0 = constant_image(16, 16, 0.4);
  const auto c1 = constant_image(16, 16, 0.5);
  const double expected = 0.8 * 0.1 + 0.2 * (1.0 - testing::ssim_direct(c1, c0));
  CHECK(loss_gs(c1, c0, cfg) == doctest::Approx(expected).epsilon(1e-10));
  cfg.ssim_weight = 0.0;
  const auto r = testing::random_image(6, 16, 16, 3);
  double l1 = 0.0;
  for (size_t i = 0; i < r.size(); ++i) l1 += std::abs(r.data[i] - gt.data[i]);
  CHECK(loss_gs(r, gt, cfg) == doctest::Approx(l1 / r.size()).epsilon(1e-12));
  CHECK_THROWS_AS(loss_gs(r, ImageBuffer(16, 15, 3), cfg), ShapeMismatch);
}

TEST_CASE("loss_tgt closed forms and hook weight") {
  OptimizerConfig cfg;
  const auto gt = testing::random_image(7, 16, 16, 3);
  CHECK(loss_tgt(gt, gt, cfg) == doctest::Approx(0.0).epsilon(1e-12));
  const auto c0 = constant_image(16, 16, 0.4);
  const auto c1 = constant_image(16, 16, 0.5);
  const double expected = 0.98 * 0.01 + 0.02 * (1.0 - testing::ssim_direct(c1, c0));
  CHECK(loss_tgt(c1, c0, cfg) == doctest::Approx(expected).epsilon(1e-10));
  PerceptualHook one = [](const ImageBuffer&, const ImageBuffer&, ImageBuffer*) { return 1.0; };
  CHECK(loss_tgt(c1, c0, cfg, one) - loss_tgt(c1, c0, cfg) == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("loss gradients match finite differences") {
  OptimizerConfig cfg;
  const auto a = testing::random_image(8, 10, 11, 3);
  const auto b = testing::random_image(9, 10, 11, 3);
  for (int which = 0; which < 2; ++which) {
    ImageBuffer g;
    if (which == 0) loss_gs(a, b, cfg, &g);
    else loss_tgt(a, b, cfg, {}, &g);
    double worst = 0.0, gmax = 0.0;
    for (double v : g.data) gmax = std::max(gmax, std::abs(v));
    for (size_t i = 0; i < a.size(); i += 7) {
      auto f = [&](double x) {
        ImageBuffer p = a;
        p.data[i] = x;
        return which == 0 ? loss_gs(p, b, cfg) : loss_tgt(p, b, cfg);
      };
      const double fd = testing::central_diff(f, a.data[i], 1e-6);
      worst = std::max(worst, testing::rel_err(g.data[i], fd, 1e-3 * gmax));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("psnr") {
  const auto a = constant_image(4, 4, 0.5);
  CHECK(psnr(a, a) == 99.0);
  CHECK(psnr(a, constant_image(4, 4, 0.6)) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("optimizer config validation") {
  OptimizerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.adc_stop_step = 100;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.adc_stop_step = 0;
  CHECK_NOTHROW(cfg.validate());
  cfg.ssim_weight = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("one adam step with zero gradient changes nothing") {
  GaussianScene scene = testing::random_scene(11, 20, 2);
  const GaussianScene before = scene;
  SceneAdam adam(scene);
  render::SceneGradients g;
  g.resize(scene.size(), sh_coeff_count(2));
  g.set_zero();
  std::fill(g.visible.begin(), g.visible.end(), 1);
  adam.step(scene, g, LearningRates{}, 1e-3);
  CHECK(scene == before);
}

TEST_CASE("adam moves parameters against the gradient sign") {
  GaussianScene scene = testing::random_scene(12, 3, 0);
  const GaussianScene before = scene;
  SceneAdam adam(scene);
  render::SceneGradients g;
  g.resize(scene.size(), 1);
  g.set_zero();
  std::fill(g.visible.begin(), g.visible.end(), 1);
  g.opacity_logit = {1.0, -1.0, 0.0};
  g.visible[2] = 0;
  adam.step(scene, g, LearningRates{}, 1e-3);
  CHECK(scene.primitives[0].opacity_logit < before.primitives[0].opacity_logit);
  CHECK(scene.primitives[1].opacity_logit > before.primitives[1].opacity_logit);
  // first step of Adam moves by exactly lr (up to float rounding)
  CHECK(double(before.primitives[0].opacity_logit) - scene.primitives[0].opacity_logit ==
        doctest::Approx(0.05).epsilon(1e-5));
  CHECK(scene.primitives[2] == before.primitives[2]);
}

TEST_CASE("clone with opacity compensation preserves the rendering") {
  GaussianScene scene;
  GaussianPrimitive g;
  // Wide enough that every pixel stays above the 1/255 weight cut-off for
  // both the parent and the half-opacity clones; inside that band the
  // compositing error of the pair is at most α'^2 / 4.
  g.position = {0.1f, -0.05f, 0.0f};
  g.log_scale = {1.2f, 1.0f, 1.3f};
  g.rotation = {0.9f, 0.1f, 0.3f, -0.2f};
  g.opacity_logit = static_cast<float>(logit(0.05));
  g.sh = {1.0f, 0.5f, 0.2f};
  scene.primitives.push_back(g);
  const CameraView cam = testing::front_camera(32, 32, 28.0, 4.0);
  const auto before = render::rasterize(scene, cam).color;
  clone_primitive(scene, 0);
  REQUIRE(scene.size() == 2);
  const auto after = render::rasterize(scene, cam).color;
  double worst = 0.0;
  for (size_t i = 0; i < before.size(); ++i) worst = std::max(worst, std::abs(before.data[i] - after.data[i]));
  CHECK(worst < 1e-3);
}

TEST_CASE("densify_and_prune prunes transparent primitives and splits large hot ones") {
  GaussianScene scene = testing::random_scene(13, 4, 0, 1.0, -1.0, -0.5);
  scene.primitives[0].opacity_logit = static_cast<float>(logit(0.001));
  OptimizerConfig cfg;
  AdcStats stats;
  stats.resize(4);
  stats.abs_grad = {0.0, 1.0, 0.0, 0.0};
  stats.count = {1, 1, 1, 1};
  SceneAdam adam(scene);
  std::mt19937_64 rng(0);
  const auto ev = densify_and_prune(scene, stats, adam, cfg, rng);
  CHECK(ev.pruned == 1);
  CHECK(ev.split == 1);
  CHECK(ev.cloned == 0);
  CHECK(scene.size() == 4);  // 4 - 1 pruned - 1 parent + 2 children
  CHECK(adam.size() == 4);
  CHECK(stats.count.size() == 4);
  const float child = scene.primitives[2].log_scale[0];
  const auto parent = testing::random_scene(13, 4, 0, 1.0, -1.0, -0.5).primitives[1];
  CHECK(child == doctest::Approx(parent.log_scale[0] - std::log(1.6)).epsilon(1e-6));
}

TEST_CASE("fit rejects an empty view set") {
  CHECK_THROWS_AS(fit(testing::random_scene(1, 3), {}, OptimizerConfig{}), EmptyViewSet);
}

TEST_CASE("fit without density control keeps the primitive count") {
  const GaussianScene gt = testing::random_scene(21, 40, 0, 1.0, -2.0, -1.2);
  const auto views = as_sources(testing::ring_views(gt, 3, 24, 24, 22.0));
  OptimizerConfig cfg;
  cfg.total_steps = 300;
  cfg.warmup_steps = 0;
  cfg.adc_stop_step = 0;
  cfg.adc_interval = 10;
  FitLog log;
  const auto out = fit(perturbed(gt, 1, 0.05), views, cfg, &log);
  CHECK(out.size() == gt.size());
  for (const auto& r : log.rows) CHECK(r.primitive_count == static_cast<int>(gt.size()));
}

TEST_CASE("all-black view drives a white Gaussian's opacity down monotonically") {
  GaussianScene scene;
  GaussianPrimitive g;
  g.log_scale = {-1.0f, -1.0f, -1.0f};
  g.opacity_logit = 0.5f;
  g.sh = {float(rgb_to_sh0(1.0)), float(rgb_to_sh0(1.0)), float(rgb_to_sh0(1.0))};
  scene.primitives.push_back(g);
  CameraView cam = testing::front_camera(16, 16, 14.0, 4.0);
  cam.image = ImageBuffer(16, 16, 3, 0.0);
  OptimizerConfig cfg;
  cfg.total_steps = 1;
  cfg.adc_stop_step = 0;
  double prev = scene.primitives[0].opacity_logit;
  const double start = prev;
  bool monotone = true;
  for (int s = 0; s < 100; ++s) {
    cfg.seed = s;
    // one step at a time keeps a fresh optimizer per call; run a persistent one instead
    (void)cfg;
    break;
  }
  // persistent loop through the public optimizer pieces
  SceneAdam adam(scene);
  for (int s = 0; s < 100; ++s) {
    const auto out = render::rasterize(scene, cam);
    ImageBuffer grad;
    loss_gs(out.color, cam.image, cfg, &grad);
    const auto gr = render::rasterize_backward(scene, cam, grad);
    adam.step(scene, gr, cfg.lr, cfg.lr.position);
    const double cur = scene.primitives[0].opacity_logit;
    if (!(cur < prev)) monotone = false;
    prev = cur;
  }
  CHECK(monotone);
  CHECK(prev < start - 1.0);
}

TEST_CASE("fit improves train PSNR by at least 5 dB on a synthetic scene") {
  const GaussianScene gt = testing::random_scene(31, 100, 0, 1.0, -2.2, -1.4);
  const auto views = as_sources(testing::ring_views(gt, 4, 32, 32, 30.0));
  OptimizerConfig cfg;
  cfg.total_steps = 5000;
  FitLog log;
  const GaussianScene init = perturbed(gt, 2, 0.05);
  const auto before = evaluate_views(init, views, cfg);
  const auto after_scene = fit(init, views, cfg, &log);
  const auto after = evaluate_views(after_scene, views, cfg);
  MESSAGE("psnr ", before.psnr, " -> ", after.psnr, " primitives ", after_scene.size());
  CHECK(after.psnr >= before.psnr + 5.0);
  CHECK(after.loss <= before.loss);
  for (const auto& r : log.rows) {
    CHECK(std::isfinite(r.loss));
    CHECK(std::isfinite(r.psnr));
  }
}

TEST_CASE("fit loss stays finite across a randomized matrix") {
  for (uint64_t seed = 0; seed < 4; ++seed) {
    const int degree = static_cast<int>(seed % 3);
    const GaussianScene gt = testing::random_scene(40 + seed, 30, degree);
    auto views = as_sources(testing::ring_views(gt, 3, 16, 16, 15.0));
    views[seed % 3].kind = LossKind::Target;
    OptimizerConfig cfg;
    cfg.total_steps = 400;
    cfg.warmup_steps = 50;
    cfg.adc_stop_step = 300;
    cfg.adc_interval = 50;
    cfg.log_interval = 10;
    cfg.seed = seed;
    FitLog log;
    const auto out = fit(perturbed(gt, seed, 0.1), views, cfg, &log);
    CHECK(log.rows.size() >= 40);
    for (const auto& r : log.rows) CHECK(std::isfinite(r.loss));
    for (const auto& p : out.primitives) CHECK(std::isfinite(p.position[0]));
  }
}

TEST_CASE("align_metric_scale exact cases") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  ImageBuffer d(10, 10, 1), m(10, 10, 1), w(10, 10, 1, 1.0);
  for (size_t i = 0; i < d.size(); ++i) {
    d.data[i] = u(rng);
    m.data[i] = 2.0 * d.data[i];
  }
  CHECK(align_metric_scale({d}, {m}, {w}) == doctest::Approx(2.0).epsilon(1e-15));
  for (size_t i = 0; i < d.size(); i += 10) m.data[i] = 1e6;
  CHECK(align_metric_scale({d}, {m}, {w}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(align_metric_scale({d}, {m}, {ImageBuffer(10, 10, 1, 0.0)}), NoValidPixels);
  CHECK_THROWS_AS(align_metric_scale({d}, {m}, {ImageBuffer(10, 9, 1, 1.0)}), ShapeMismatch);
}

TEST_CASE("align_metric_scale matches golden-section search and ignores confidence scaling") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.2, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    ImageBuffer d(25, 40, 1), m(25, 40, 1), w(25, 40, 1);
    for (size_t i = 0; i < d.size(); ++i) {
      d.data[i] = u(rng);
      m.data[i] = u(rng) * 1.7;
      w.data[i] = u(rng);
    }
    const double beta = align_metric_scale({d}, {m}, {w});
    auto obj = [&](double b) { return scale_objective(b, {d}, {m}, {w}); };
    const double gs = testing::golden_section_min(obj, 0.01, 50.0);
    CHECK(std::abs(beta - gs) < 1e-6);
    CHECK(obj(beta) <= obj(gs) + 1e-9);
    ImageBuffer w2 = w;
    for (double& v : w2.data) v *= 37.5;
    CHECK(align_metric_scale({d}, {m}, {w2}) == beta);
  }
}
