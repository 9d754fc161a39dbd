#include "splatflow/flow/flow.hpp"

#include <cmath>

#include "splatflow/core/error.hpp"

namespace splatflow::flow {

namespace {

double frame_time(const std::vector<double>& t, int frames, int i) {
  if (t.size() == 1) return t[0];
  if (t.size() != static_cast<size_t>(frames)) throw ShapeMismatch("interpolate_state: one t per frame expected");
  return t[i];
}

}  // namespace

Tensor interpolate_state(const Tensor& z0, const Tensor& z1, const std::vector<double>& t) {
  require_same_shape(z0, z1, "interpolate_state");
  if (z0.shape.empty()) throw ShapeMismatch("interpolate_state: empty tensor");
  for (double v : t) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("interpolate_state: t must lie in [0, 1]");
  }
  Tensor out(z0.shape);
  const size_t fs = z0.frame_size();
  for (int f = 0; f < z0.frames(); ++f) {
    const double tf = frame_time(t, z0.frames(), f);
    const double a = 1.0 - (1.0 - kSigmaMin) * tf;
    for (size_t k = f * fs; k < (f + 1) * fs; ++k) out.data[k] = tf * z1.data[k] + a * z0.data[k];
  }
  return out;
}

Tensor target_velocity(const Tensor& z0, const Tensor& z1) {
  require_same_shape(z0, z1, "target_velocity");
  Tensor v(z0.shape);
  for (size_t k = 0; k < v.size(); ++k) v.data[k] = z1.data[k] - (1.0 - kSigmaMin) * z0.data[k];
  return v;
}

double cfm_loss(const Tensor& pred, const Tensor& z0, const Tensor& z1, Tensor* grad) {
  require_same_shape(pred, z0, "cfm_loss");
  const Tensor v = target_velocity(z0, z1);
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  if (grad) *grad = Tensor(pred.shape);
  double s = 0.0;
  for (size_t k = 0; k < pred.size(); ++k) {
    const double d = pred.data[k] - v.data[k];
    s += d * d;
    if (grad) grad->data[k] = 2.0 * d * inv_n;
  }
  return s * inv_n;
}

void TimeSampler::validate() const {
  if (kind == TimeDistribution::LogitNormal && !(scale > 0.0)) throw InvalidArgument("TimeSampler: scale must be > 0");
}

std::vector<double> sample_time(const TimeSampler& sampler, int n_frames, std::mt19937_64& rng) {
  sampler.validate();
  if (n_frames < 1) throw InvalidArgument("sample_time: n_frames must be >= 1");
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto draw = [&] {
    if (sampler.kind == TimeDistribution::Uniform) return uni(rng);
    return 1.0 / (1.0 + std::exp(-(sampler.location + sampler.scale * nrm(rng))));
  };
  std::vector<double> t(n_frames);
  if (sampler.per_frame) {
    for (double& v : t) v = draw();
  } else {
    const double v = draw();
    for (double& x : t) x = v;
  }
  return t;
}

double time_cdf(const TimeSampler& sampler, double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  if (sampler.kind == TimeDistribution::Uniform) return t;
  const double z = (std::log(t / (1.0 - t)) - sampler.location) / sampler.scale;
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

std::vector<double> make_schedule(int n_steps, ScheduleKind kind, double shift) {
  if (n_steps < 1) throw InvalidSchedule("make_schedule: n_steps must be >= 1");
  if (!(shift >= 0.0)) throw InvalidSchedule("make_schedule: shift must be >= 0");
  std::vector<double> t(n_steps + 1, 0.0);
  if (kind == ScheduleKind::Uniform || shift == 0.0) {
    for (int i = 0; i <= n_steps; ++i) t[i] = static_cast<double>(i) / n_steps;
  } else {
    // With u = 1 - t the recurrence u_{i+1} = u_i (1 - c shift) - c is linear,
    // and u_n = 0 gives c directly.
    const double c = -std::expm1(-std::log1p(shift) / n_steps) / shift;
    for (int i = 0; i < n_steps; ++i) t[i + 1] = t[i] + c * (1.0 + shift * (1.0 - t[i]));
  }
  t[n_steps] = 1.0;
  std::vector<double> dt(n_steps);
  for (int i = 0; i < n_steps; ++i) dt[i] = t[i + 1] - t[i];
  validate_schedule(dt);
  return dt;
}

void validate_schedule(const std::vector<double>& dt) {
  if (dt.empty()) throw InvalidSchedule("schedule has no steps");
  double s = 0.0;
  for (double d : dt) {
    if (!(d > 0.0)) throw InvalidSchedule("schedule step must be > 0");
    s += d;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InvalidSchedule("schedule steps must sum to 1");
}

Tensor integrate_euler(const VelocityFn& velocity, const Tensor& z0, const std::vector<double>& dt) {
  validate_schedule(dt);
  Tensor z = z0;
  double t = 0.0;
  for (double h : dt) {
    const Tensor v = velocity(z, t);
    require_same_shape(v, z, "integrate_euler");
    for (size_t k = 0; k < z.size(); ++k) z.data[k] += h * v.data[k];
    t += h;
  }
  return z;
}

Tensor integrate_euler(const VelocityFn& velocity, const Tensor& z0, int n_steps) {
  return integrate_euler(velocity, z0, make_schedule(n_steps));
}

}  // namespace splatflow::flow
