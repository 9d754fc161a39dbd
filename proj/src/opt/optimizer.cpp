#include "splatflow/opt/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "splatflow/core/error.hpp"

namespace splatflow::opt {

void OptimizerConfig::validate() const {
  if (total_steps < 0) throw InvalidArgument("total_steps must be >= 0");
  if (warmup_steps < 0) throw InvalidArgument("warmup_steps must be >= 0");
  if (adc_stop_step != 0 && !(warmup_steps < adc_stop_step && adc_stop_step <= total_steps)) {
    throw InvalidArgument("expected warmup_steps < adc_stop_step <= total_steps");
  }
  if (adc_interval < 1) throw InvalidArgument("adc_interval must be >= 1");
  for (double w : {ssim_weight, tgt_ssim_weight, lpips_weight}) {
    if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("loss weights must lie in [0, 1]");
  }
  for (double v : {lr.position, lr.position_final, lr.log_scale, lr.rotation, lr.opacity, lr.sh_dc, lr.sh_rest}) {
    if (!(v >= 0.0)) throw InvalidArgument("learning rates must be >= 0");
  }
  if (!(split_factor > 1.0)) throw InvalidArgument("split_factor must be > 1");
  if (log_interval < 1) throw InvalidArgument("log_interval must be >= 1");
}

void AdcStats::resize(size_t k) {
  max_grad.assign(k, 0.0);
  abs_grad.assign(k, 0.0);
  count.assign(k, 0);
  max_radius.assign(k, 0.0);
}

void AdcStats::reset() { resize(max_grad.size()); }

void AdcStats::accumulate(const render::SceneGradients& g, const CameraView& cam) {
  const double ndc = 0.5 * std::max(cam.width, cam.height);
  for (size_t i = 0; i < g.visible.size() && i < count.size(); ++i) {
    if (!g.visible[i]) continue;
    abs_grad[i] += g.abs_grad[i] * ndc;
    max_grad[i] = std::max(max_grad[i], g.mean2d_grad_norm[i] * ndc);
    max_radius[i] = std::max(max_radius[i], g.radius[i]);
    ++count[i];
  }
}

SceneAdam::SceneAdam(const GaussianScene& scene)
    : stride_(stride(scene.sh_degree)),
      rows_(scene.size()),
      m_(rows_ * stride_, 0.0),
      v_(rows_ * stride_, 0.0) {}

void SceneAdam::step(GaussianScene& scene, const render::SceneGradients& g, const LearningRates& lr,
                     double position_lr) {
  if (scene.size() != rows_) throw ShapeMismatch("SceneAdam: scene size changed without remap");
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, t_);
  const double bc2 = 1.0 - std::pow(kBeta2, t_);
  const int nsh = 3 * sh_coeff_count(scene.sh_degree);
  auto update = [&](size_t row, int j, double grad, double rate, float& param) {
    double& m = m_[row * stride_ + j];
    double& v = v_[row * stride_ + j];
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
    const double denom = std::sqrt(v / bc2) + kEps;
    param = static_cast<float>(static_cast<double>(param) - rate * (m / bc1) / denom);
  };
  for (size_t i = 0; i < rows_; ++i) {
    if (!g.visible[i]) continue;
    auto& p = scene.primitives[i];
    for (int a = 0; a < 3; ++a) update(i, a, g.position[3 * i + a], position_lr, p.position[a]);
    for (int a = 0; a < 3; ++a) update(i, 3 + a, g.log_scale[3 * i + a], lr.log_scale, p.log_scale[a]);
    for (int a = 0; a < 4; ++a) update(i, 6 + a, g.rotation[4 * i + a], lr.rotation, p.rotation[a]);
    update(i, 10, g.opacity_logit[i], lr.opacity, p.opacity_logit);
    for (int k = 0; k < nsh; ++k) {
      update(i, 11 + k, g.sh[i * nsh + k], k < 3 ? lr.sh_dc : lr.sh_rest, p.sh[k]);
    }
  }
}

void SceneAdam::remap(const std::vector<long>& origin) {
  std::vector<double> m(origin.size() * stride_, 0.0), v(origin.size() * stride_, 0.0);
  for (size_t i = 0; i < origin.size(); ++i) {
    if (origin[i] < 0) continue;
    const size_t o = static_cast<size_t>(origin[i]);
    std::copy_n(m_.begin() + o * stride_, stride_, m.begin() + i * stride_);
    std::copy_n(v_.begin() + o * stride_, stride_, v.begin() + i * stride_);
  }
  m_ = std::move(m);
  v_ = std::move(v);
  rows_ = origin.size();
}

namespace {

GaussianPrimitive compensated_copy(const GaussianPrimitive& g) {
  GaussianPrimitive c = g;
  const double a = g.opacity();
  c.opacity_logit = static_cast<float>(logit(1.0 - std::sqrt(1.0 - a)));
  return c;
}

}  // namespace

void clone_primitive(GaussianScene& scene, size_t index) {
  GaussianPrimitive c = compensated_copy(scene.primitives.at(index));
  scene.primitives[index] = c;
  scene.primitives.push_back(std::move(c));
}

AdcEvent densify_and_prune(GaussianScene& scene, AdcStats& stats, SceneAdam& adam, const OptimizerConfig& cfg,
                           std::mt19937_64& rng) {
  AdcEvent ev;
  const size_t n = scene.size();
  const double large = cfg.percent_dense * cfg.spatial_lr_scale;
  std::normal_distribution<double> nrm(0.0, 1.0);

  std::vector<GaussianPrimitive> out;
  std::vector<long> origin;
  std::vector<GaussianPrimitive> added;
  out.reserve(n);
  long budget = std::max<long>(0, static_cast<long>(cfg.max_primitives) - static_cast<long>(n));
  for (size_t i = 0; i < n; ++i) {
    const auto& g = scene.primitives[i];
    const double score = stats.count[i] > 0 ? stats.abs_grad[i] / stats.count[i] : 0.0;
    const bool hot = score >= cfg.densify_grad_threshold;
    const bool too_wide = cfg.max_screen_size > 0.0 && stats.max_radius[i] > cfg.max_screen_size;
    const bool is_large = g.scale().maxCoeff() > large;
    if (budget > 0 && ((hot && is_large) || too_wide)) {
      const Mat3 R = quat_to_rotation(g.quat());
      const Vec3 s = g.scale();
      for (int k = 0; k < 2; ++k) {
        GaussianPrimitive c = g;
        const Vec3 x(nrm(rng) * s.x(), nrm(rng) * s.y(), nrm(rng) * s.z());
        const Vec3 p = g.mean() + R * x;
        for (int a = 0; a < 3; ++a) {
          c.position[a] = static_cast<float>(p[a]);
          c.log_scale[a] = static_cast<float>(g.log_scale[a] - std::log(cfg.split_factor));
        }
        added.push_back(std::move(c));
      }
      --budget;
      ++ev.split;
      continue;
    }
    if (budget > 0 && hot) {
      GaussianPrimitive c = compensated_copy(g);
      out.push_back(c);
      origin.push_back(static_cast<long>(i));
      added.push_back(std::move(c));
      --budget;
      ++ev.cloned;
      continue;
    }
    out.push_back(g);
    origin.push_back(static_cast<long>(i));
  }
  for (auto& c : added) {
    out.push_back(std::move(c));
    origin.push_back(-1);
  }

  std::vector<GaussianPrimitive> kept;
  std::vector<long> kept_origin;
  kept.reserve(out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    if (out[i].opacity() < cfg.prune_opacity) {
      ++ev.pruned;
      continue;
    }
    kept.push_back(std::move(out[i]));
    kept_origin.push_back(origin[i]);
  }
  scene.primitives = std::move(kept);
  adam.remap(kept_origin);
  stats.resize(scene.size());
  return ev;
}

}  // namespace splatflow::opt
