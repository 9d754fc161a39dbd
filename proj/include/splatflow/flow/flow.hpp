#pragma once

#include <functional>
#include <random>
#include <vector>

#include "splatflow/core/tensor.hpp"

namespace splatflow::flow {

inline constexpr double kSigmaMin = 1e-5;

/// Everything the velocity field sees besides the state: clean source-view
/// latents, one ray map per frame (targets first, then sources) and one view
/// index per frame in the same order.
struct Conditioning {
  Tensor sources;  // [M, h, w, C]; empty when M = 0
  Tensor raymaps;  // [N + M, h, w, 6]
  std::vector<int> indices;
};

/// z0 and z1 hold the N target frames. `t` is filled per frame at training time.
struct FlowBatch {
  Tensor z0;
  Tensor z1;
  Conditioning cond;
  std::vector<double> t;
};

/// z_t = t z1 + (1 - (1 - σ_min) t) z0. `t` holds one value per frame
/// (leading axis) or a single value broadcast to every frame.
Tensor interpolate_state(const Tensor& z0, const Tensor& z1, const std::vector<double>& t);

/// v = z1 - (1 - σ_min) z0, the time derivative of interpolate_state.
Tensor target_velocity(const Tensor& z0, const Tensor& z1);

/// Mean squared error between `pred` and target_velocity(z0, z1). When
/// `grad` is non-null it receives d loss / d pred.
double cfm_loss(const Tensor& pred, const Tensor& z0, const Tensor& z1, Tensor* grad = nullptr);

enum class TimeDistribution { LogitNormal, Uniform };

struct TimeSampler {
  TimeDistribution kind = TimeDistribution::LogitNormal;
  double location = 0.0;  // m
  double scale = 1.0;     // s
  bool per_frame = true;

  void validate() const;
};

/// t = sigmoid(m + s N(0, 1)) per frame, or one shared draw when !per_frame.
std::vector<double> sample_time(const TimeSampler& sampler, int n_frames, std::mt19937_64& rng);

/// Analytic CDF of the sampler's distribution.
double time_cdf(const TimeSampler& sampler, double t);

enum class ScheduleKind { Shifted, Uniform };

/// Step sizes Δt_0..Δt_{n-1} partitioning [0, 1]. Shifted spacing satisfies
/// Δt_i = c (1 + shift (1 - t_i)) with t_i the start of step i; c has the
/// closed form (1 - (1 + shift)^(-1/n)) / shift, so the steps shrink
/// monotonically towards t = 1.
std::vector<double> make_schedule(int n_steps, ScheduleKind kind = ScheduleKind::Shifted, double shift = 3.0);

/// Throws InvalidSchedule unless every Δt > 0 and |Σ Δt - 1| <= 1e-9.
void validate_schedule(const std::vector<double>& dt);

using VelocityFn = std::function<Tensor(const Tensor& z, double t)>;

/// z_{t+Δt} = z_t + Δt v(z_t, t) over the schedule, starting at t = 0.
Tensor integrate_euler(const VelocityFn& velocity, const Tensor& z0, const std::vector<double>& dt);
Tensor integrate_euler(const VelocityFn& velocity, const Tensor& z0, int n_steps = 20);

}  // namespace splatflow::flow
