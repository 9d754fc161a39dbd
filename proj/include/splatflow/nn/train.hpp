#pragma once

#include <cstdint>
#include <vector>

#include "splatflow/flow/flow.hpp"
#include "splatflow/nn/model.hpp"

namespace splatflow::nn {

/// Adam over a list of parameters. After each update every value is rounded
/// to float32, so checkpoints (stored in float32) reload bit-exactly.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Var> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Uses the gradients currently stored in the parameters. When clip > 0
  /// the global gradient norm is clipped to it first.
  void step(double lr, double clip = 0.0);
  void zero_grad();
  int steps() const { return t_; }

 private:
  std::vector<Var> params_;
  std::vector<std::vector<double>> m_, v_;
  double b1_, b2_, eps_;
  int t_ = 0;
};

struct TrainConfig {
  int steps = 2000;
  int batch_size = 4;
  double lr = 1e-3;
  int warmup_steps = 100;  // linear ramp, then cosine decay to lr * final_lr_ratio
  double final_lr_ratio = 0.1;
  double grad_clip = 1.0;
  uint64_t seed = 0;
  flow::TimeSampler time;
  bool random_indices = true;  // otherwise default_indices
};

struct TrainResult {
  std::vector<double> loss_history;  // batch-mean CFM loss per step
};

/// CFM training on `data`: per step, draws batch_size items, a time per
/// target frame and (optionally) sorted distinct view indices from [0, 1000].
TrainResult train_toy(VelocityModel& model, const std::vector<flow::FlowBatch>& data, const TrainConfig& cfg);

/// Mean CFM loss on `data` with times drawn from a fixed seed and default indices.
double validation_loss(const VelocityModel& model, const std::vector<flow::FlowBatch>& data, uint64_t seed = 7,
                       const flow::TimeSampler& sampler = {});

/// `count` distinct values from [0, 1000] in ascending order.
std::vector<int> random_indices(int count, std::mt19937_64& rng);

/// Learning rate at `step` (0-based) under cfg's warmup + cosine schedule.
double scheduled_lr(const TrainConfig& cfg, int step);

}  // namespace splatflow::nn
