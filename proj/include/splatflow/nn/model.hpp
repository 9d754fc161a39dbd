#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "splatflow/flow/flow.hpp"
#include "splatflow/nn/autodiff.hpp"

namespace splatflow::nn {

struct ModelConfig {
  int channels = 3;  // latent channels
  int dim = 128;
  int heads = 4;
  int blocks = 4;
  int mlp_ratio = 4;
  int time_dim = 64;  // sinusoidal features fed to the time MLP

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Inputs for one forward pass. Frames are ordered targets first, then
/// sources; `raymaps` and `indices` follow the same order.
struct ModelInput {
  Tensor targets;  // [N, h, w, C] current states
  Tensor sources;  // [M, h, w, C] clean latents; empty when M = 0
  Tensor raymaps;  // [N + M, h, w, 6]
  std::vector<int> indices;
  std::vector<double> t;  // one per target frame
};

using NamedParam = std::pair<std::string, Var>;

/// Multi-view velocity field. Each block applies time-modulated per-view
/// attention, a multi-view attention branch over all frames' tokens (input:
/// tokens plus γ(i), concatenated with the ray-map embedding and projected
/// back to the token width, closed by a zero-initialised linear layer) and a
/// modulated feed-forward layer. Source frames are modulated with t = 1.
/// Only target frames produce outputs.
class VelocityModel {
 public:
  VelocityModel() = default;
  VelocityModel(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  /// Recorded forward pass returning [N, h, w, C]. With use_multiview =
  /// false the multi-view branch is skipped entirely.
  Var forward(const ModelInput& in, bool use_multiview = true) const;
  /// Non-recording forward.
  Tensor predict(const ModelInput& in, bool use_multiview = true) const;

  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  size_t parameter_count() const;
  void zero_grad();

  /// Re-draws every parameter, including the zero-initialised ones unless
  /// keep_zero_init is set (then only the multi-view output layers stay zero).
  void randomize_all(uint64_t seed, bool keep_multiview_zero = false);

  /// "FLWRNET1" checkpoint: config, then named float32 parameters.
  void save(const std::string& path) const;
  static VelocityModel load(const std::string& path);

  bool operator==(const VelocityModel& o) const;

 private:
  Var p(const std::string& name) const;
  void build(uint64_t seed);
  void add_param(const std::string& name, std::vector<int> shape);

  ModelConfig cfg_;
  std::vector<NamedParam> params_;
  std::unordered_map<std::string, size_t> index_;
};

/// Euler integration of the model's field from `batch.z0` with fixed
/// conditioning. View indices default to evenly spaced values in [0, 1000].
Tensor integrate(const VelocityModel& model, const flow::FlowBatch& batch, int n_steps = 20);

/// Evenly spaced indices in [0, 1000] for `frames` frames.
std::vector<int> default_indices(int frames);

}  // namespace splatflow::nn
