#include "splatflow/nn/toy.hpp"

#include <cmath>
#include <numbers>

#include "splatflow/nn/encoding.hpp"
#include "splatflow/nn/train.hpp"
#include "splatflow/render/rasterizer.hpp"
#include "splatflow/render/synthetic.hpp"

namespace splatflow::nn {

ImageBuffer encode_latent(const ImageBuffer& img, int factor) {
  ImageBuffer z = downsample(img, factor);
  for (double& v : z.data) v = 2.0 * v - 1.0;
  return z;
}

ImageBuffer decode_latent(const ImageBuffer& latent) {
  ImageBuffer img = latent;
  for (double& v : img.data) v = 0.5 * (v + 1.0);
  return img;
}

namespace {

GaussianScene corrupt(const GaussianScene& gt, double severity, std::mt19937_64& rng) {
  GaussianScene s = gt;
  if (severity <= 0.0) return s;
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& g : s.primitives) {
    for (auto& p : g.position) p = static_cast<float>(p + severity * 0.08 * nrm(rng));
    for (auto& l : g.log_scale) l = static_cast<float>(l + severity * 0.5 * uni(rng));
    for (int c = 0; c < 3; ++c) g.sh[c] = static_cast<float>(g.sh[c] + rgb_to_sh0(severity * 0.15 * nrm(rng)));
    if (uni(rng) < 0.25 * severity) g.opacity_logit = -20.0f;
  }
  return s;
}

Tensor single(const ImageBuffer& img) { return stack_frames({img}); }

}  // namespace

std::vector<flow::FlowBatch> make_corruption_dataset(const CorruptionTaskConfig& cfg, int count, uint64_t seed,
                                                     double severity) {
  std::vector<flow::FlowBatch> out;
  const int lat = cfg.image_size / cfg.latent_factor;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<uint64_t>(i));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    render::SyntheticSceneConfig sc;
    sc.primitives = cfg.primitives;
    const GaussianScene gt = render::make_synthetic_scene(sc, rng());
    const double a = 2.0 * std::numbers::pi * uni(rng);
    const double da = 0.3 + 0.3 * uni(rng);
    const double focal = 1.2 * cfg.image_size;
    auto tgt_cam = render::orbit_cameras(1, cfg.image_size, cfg.image_size, focal, 3.0, 0.3, a)[0];
    auto src_cam = render::orbit_cameras(1, cfg.image_size, cfg.image_size, focal, 3.0, 0.3, a + da)[0];
    double s = severity;
    if (s < 0.0) s = uni(rng) < cfg.identity_fraction ? 0.0 : cfg.max_severity * uni(rng);
    const GaussianScene bad = corrupt(gt, s, rng);

    flow::FlowBatch b;
    b.z1 = single(encode_latent(render::rasterize(gt, tgt_cam).color, cfg.latent_factor));
    b.z0 = single(encode_latent(render::rasterize(bad, tgt_cam).color, cfg.latent_factor));
    b.cond.sources = single(encode_latent(render::rasterize(gt, src_cam).color, cfg.latent_factor));
    const std::vector<CameraView> frames{tgt_cam, src_cam};
    b.cond.raymaps = raymap_stack(frames, frames[reference_view(frames)], lat, lat);
    out.push_back(std::move(b));
  }
  return out;
}

flow::FlowBatch to_gaussian_source(const flow::FlowBatch& item, std::mt19937_64& rng) {
  std::normal_distribution<double> nrm(0.0, 1.0);
  flow::FlowBatch g;
  g.z1 = item.z1;
  g.z0 = Tensor(item.z0.shape);
  for (double& v : g.z0.data) v = nrm(rng);
  const int n = item.z0.frames();
  const int m = item.cond.sources.frames();
  // sources: corrupted latents first, then the original sources
  std::vector<int> shape = item.z0.shape;
  shape[0] = n + m;
  g.cond.sources = Tensor(shape);
  std::copy(item.z0.data.begin(), item.z0.data.end(), g.cond.sources.data.begin());
  std::copy(item.cond.sources.data.begin(), item.cond.sources.data.end(), g.cond.sources.data.begin() + item.z0.size());
  // ray maps: targets, then the targets again for the corrupted frames, then the sources
  std::vector<int> rshape = item.cond.raymaps.shape;
  const size_t fs = item.cond.raymaps.frame_size();
  rshape[0] = 2 * n + m;
  g.cond.raymaps = Tensor(rshape);
  auto& dst = g.cond.raymaps.data;
  const auto& src = item.cond.raymaps.data;
  std::copy(src.begin(), src.begin() + n * fs, dst.begin());
  std::copy(src.begin(), src.begin() + n * fs, dst.begin() + n * fs);
  std::copy(src.begin() + n * fs, src.end(), dst.begin() + 2 * n * fs);
  return g;
}

double mean_corruption_mse(const std::vector<flow::FlowBatch>& data) {
  if (data.empty()) return 0.0;
  double s = 0.0;
  for (const auto& b : data) {
    double e = 0.0;
    for (size_t k = 0; k < b.z0.size(); ++k) e += (b.z0.data[k] - b.z1.data[k]) * (b.z0.data[k] - b.z1.data[k]);
    s += e / b.z0.size();
  }
  return s / data.size();
}

Tensor sample_two_moons(int n, std::mt19937_64& rng, double noise) {
  std::uniform_real_distribution<double> uni(0.0, std::numbers::pi);
  std::normal_distribution<double> nrm(0.0, noise);
  Tensor out({n, 2});
  for (int i = 0; i < n; ++i) {
    const double th = uni(rng);
    double x, y;
    if (i % 2 == 0) {
      x = std::cos(th);
      y = std::sin(th);
    } else {
      x = 1.0 - std::cos(th);
      y = 0.5 - std::sin(th);
    }
    out.data[2 * i] = x + nrm(rng);
    out.data[2 * i + 1] = y + nrm(rng);
  }
  return out;
}

MlpVelocity::MlpVelocity(int hidden, int layers, int time_dim, uint64_t seed) : time_dim_(time_dim) {
  std::mt19937_64 rng(seed);
  int din = 2 + time_dim;
  for (int l = 0; l <= layers; ++l) {
    const int dout = l == layers ? 2 : hidden;
    const double a = std::sqrt(6.0 / (din + dout));
    std::uniform_real_distribution<double> u(-a, a);
    std::vector<double> w(static_cast<size_t>(din) * dout);
    for (double& v : w) v = static_cast<float>(u(rng));
    params_.push_back(parameter({din, dout}, std::move(w)));
    params_.push_back(parameter({dout}, std::vector<double>(dout, 0.0)));
    din = dout;
  }
}

Var MlpVelocity::forward(const Tensor& x, const std::vector<double>& t) const {
  const int b = x.shape[0];
  Tensor feat({b, 2 + time_dim_});
  for (int i = 0; i < b; ++i) {
    feat.data[i * (2 + time_dim_)] = x.data[2 * i];
    feat.data[i * (2 + time_dim_) + 1] = x.data[2 * i + 1];
    const auto e = sinusoidal_encoding(100.0 * t[i], time_dim_);
    std::copy(e.begin(), e.end(), feat.data.begin() + i * (2 + time_dim_) + 2);
  }
  Var h = constant(feat);
  const size_t nl = params_.size() / 2;
  for (size_t l = 0; l < nl; ++l) {
    h = linear(h, params_[2 * l], params_[2 * l + 1]);
    if (l + 1 < nl) h = silu(h);
  }
  return h;
}

Tensor MlpVelocity::predict(const Tensor& x, double t) const {
  NoGradGuard ng;
  return to_tensor(forward(x, std::vector<double>(x.shape[0], t)));
}

MlpVelocity train_two_moons(const MoonsConfig& cfg, std::vector<double>* history) {
  MlpVelocity model(cfg.hidden, cfg.layers, cfg.time_dim, cfg.seed);
  AdamOptimizer opt(model.parameters());
  std::mt19937_64 rng(cfg.seed + 1);
  std::normal_distribution<double> nrm(0.0, 1.0);
  flow::TimeSampler sampler;
  TrainConfig sched;
  sched.steps = cfg.steps;
  sched.lr = cfg.lr;
  sched.warmup_steps = std::min(200, cfg.steps / 10);
  sched.final_lr_ratio = 0.05;
  for (int step = 0; step < cfg.steps; ++step) {
    Tensor z0({cfg.batch, 2});
    for (double& v : z0.data) v = nrm(rng);
    const Tensor z1 = sample_two_moons(cfg.batch, rng);
    const auto t = flow::sample_time(sampler, cfg.batch, rng);
    const Tensor zt = flow::interpolate_state(z0, z1, t);
    opt.zero_grad();
    const Var loss = mse(model.forward(zt, t), flow::target_velocity(z0, z1));
    backward(loss);
    opt.step(scheduled_lr(sched, step), 1.0);
    if (history) history->push_back(loss->value[0]);
  }
  return model;
}

}  // namespace splatflow::nn
