#include "splatflow/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace splatflow::nn {

AdamOptimizer::AdamOptimizer(std::vector<Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) p->grad.assign(p->size(), 0.0);
}

void AdamOptimizer::step(double lr, double clip) {
  ++t_;
  double factor = 1.0;
  if (clip > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_)
      for (double g : p->grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > clip) factor = clip / norm;
  }
  const double bc1 = 1.0 - std::pow(b1_, t_);
  const double bc2 = 1.0 - std::pow(b2_, t_);
  for (size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    if (p.grad.size() != p.value.size()) continue;
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] * factor;
      m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * g;
      v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * g * g;
      const double upd = lr * (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + eps_);
      p.value[i] = static_cast<float>(p.value[i] - upd);
    }
  }
}

std::vector<int> random_indices(int count, std::mt19937_64& rng) {
  if (count > 1001) throw InvalidArgument("random_indices: at most 1001 distinct indices");
  std::vector<int> pool(1001);
  for (int i = 0; i <= 1000; ++i) pool[i] = i;
  // partial Fisher-Yates
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> u(i, 1000);
    std::swap(pool[i], pool[u(rng)]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + count);
  std::sort(out.begin(), out.end());
  return out;
}

double scheduled_lr(const TrainConfig& cfg, int step) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) return cfg.lr * (step + 1) / cfg.warmup_steps;
  const int span = std::max(1, cfg.steps - cfg.warmup_steps);
  const double frac = std::clamp(double(step - cfg.warmup_steps) / span, 0.0, 1.0);
  const double lo = cfg.lr * cfg.final_lr_ratio;
  return lo + 0.5 * (cfg.lr - lo) * (1.0 + std::cos(std::numbers::pi * frac));
}

namespace {

ModelInput make_input(const flow::FlowBatch& b, const Tensor& zt, std::vector<double> t, std::vector<int> idx) {
  ModelInput in;
  in.targets = zt;
  in.sources = b.cond.sources;
  in.raymaps = b.cond.raymaps;
  in.indices = std::move(idx);
  in.t = std::move(t);
  return in;
}

}  // namespace

TrainResult train_toy(VelocityModel& model, const std::vector<flow::FlowBatch>& data, const TrainConfig& cfg) {
  if (data.empty()) throw InvalidArgument("train_toy: empty dataset");
  std::vector<Var> params;
  for (auto& [name, v] : model.parameters()) params.push_back(v);
  AdamOptimizer opt(params);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, data.size() - 1);
  TrainResult res;
  for (int step = 0; step < cfg.steps; ++step) {
    opt.zero_grad();
    double total = 0.0;
    for (int k = 0; k < cfg.batch_size; ++k) {
      const auto& b = data[pick(rng)];
      const int frames = b.cond.raymaps.frames();
      auto t = flow::sample_time(cfg.time, b.z0.frames(), rng);
      auto idx = cfg.random_indices ? random_indices(frames, rng) : default_indices(frames);
      const Tensor zt = flow::interpolate_state(b.z0, b.z1, t);
      const Tensor target = flow::target_velocity(b.z0, b.z1);
      const Var loss = scale(mse(model.forward(make_input(b, zt, std::move(t), std::move(idx))), target),
                             1.0 / cfg.batch_size);
      backward(loss);
      total += loss->value[0];
    }
    opt.step(scheduled_lr(cfg, step), cfg.grad_clip);
    res.loss_history.push_back(total);
  }
  return res;
}

double validation_loss(const VelocityModel& model, const std::vector<flow::FlowBatch>& data, uint64_t seed,
                       const flow::TimeSampler& sampler) {
  if (data.empty()) throw InvalidArgument("validation_loss: empty dataset");
  std::mt19937_64 rng(seed);
  double s = 0.0;
  for (const auto& b : data) {
    auto t = flow::sample_time(sampler, b.z0.frames(), rng);
    const Tensor zt = flow::interpolate_state(b.z0, b.z1, t);
    const Tensor pred = model.predict(make_input(b, zt, t, default_indices(b.cond.raymaps.frames())));
    s += flow::cfm_loss(pred, b.z0, b.z1);
  }
  return s / data.size();
}

}  // namespace splatflow::nn
