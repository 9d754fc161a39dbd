#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "splatflow/core/camera.hpp"
#include "splatflow/flow/flow.hpp"
#include "splatflow/nn/autodiff.hpp"

namespace splatflow::nn {

/// RGB image -> latent: box-downsampled by `factor` and mapped to [-1, 1].
ImageBuffer encode_latent(const ImageBuffer& img, int factor);
/// Latent -> RGB at latent resolution.
ImageBuffer decode_latent(const ImageBuffer& latent);

struct CorruptionTaskConfig {
  int image_size = 64;
  int latent_factor = 8;
  int primitives = 60;
  double identity_fraction = 0.2;  // share of pairs rendered without corruption
  double max_severity = 1.0;
};

/// Paired latents from rendering a random ground-truth scene and a corrupted
/// copy (jittered positions, inflated scales, colour drift, dropped
/// primitives; all scaled by a random severity) from the same target camera.
/// Each item has one target frame and one clean source view nearby.
/// `severity` >= 0 forces that severity for every item.
std::vector<flow::FlowBatch> make_corruption_dataset(const CorruptionTaskConfig& cfg, int count, uint64_t seed,
                                                     double severity = -1.0);

/// Gaussian-source variant of a conditional item: z0 is drawn from N(0, I)
/// and the corrupted latent becomes an extra source frame with the target's ray map.
flow::FlowBatch to_gaussian_source(const flow::FlowBatch& item, std::mt19937_64& rng);

/// Mean squared difference between z0 and z1 over a dataset.
double mean_corruption_mse(const std::vector<flow::FlowBatch>& data);

/// Two-moons samples [n, 2] with Gaussian noise of standard deviation `noise`.
Tensor sample_two_moons(int n, std::mt19937_64& rng, double noise = 0.05);

/// Small MLP velocity field for 2-D states.
class MlpVelocity {
 public:
  MlpVelocity(int hidden, int layers, int time_dim, uint64_t seed);
  /// x [B, 2], one t per row.
  Var forward(const Tensor& x, const std::vector<double>& t) const;
  Tensor predict(const Tensor& x, double t) const;
  std::vector<Var>& parameters() { return params_; }

 private:
  int time_dim_;
  std::vector<Var> params_;  // w0, b0, w1, b1, ...
};

struct MoonsConfig {
  int steps = 6000;
  int batch = 256;
  double lr = 2e-3;
  int hidden = 128;
  int layers = 3;
  int time_dim = 16;
  uint64_t seed = 0;
};

/// CFM training from N(0, I) to two moons. Returns the trained field; the
/// per-step loss is appended to `history` when given.
MlpVelocity train_two_moons(const MoonsConfig& cfg, std::vector<double>* history = nullptr);

}  // namespace splatflow::nn
