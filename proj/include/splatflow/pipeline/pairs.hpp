#pragma once

#include <string>
#include <vector>

#include "splatflow/flow/flow.hpp"
#include "splatflow/nn/train.hpp"
#include "splatflow/pipeline/reconstruct.hpp"

namespace splatflow::pipeline {

/// A rendering of a sparse reconstruction and the ground truth at a held-out camera.
struct PairRecord {
  ImageBuffer rendering;
  ImageBuffer ground_truth;
  CameraView camera;  // image left empty
  std::vector<int> source_view_ids;
  int sparsity = 0;
  std::vector<CameraView> references;  // closest input views, with their images
};

/// For every sparsity level s: s equally spaced input views, an initial
/// reconstruction on them, and one pair per remaining view. Levels that leave
/// no held-out view produce no pairs and a warning. Each pair keeps the
/// n_refs closest input views as references.
std::vector<PairRecord> generate_pairs(const SyntheticScene& scene, const std::vector<int>& sparsity_levels,
                                       const ReconConfig& cfg, int n_refs = 2,
                                       std::vector<std::string>* warnings = nullptr);

/// Flow training items from pairs (see make_flow_item).
std::vector<flow::FlowBatch> make_flow_dataset(const std::vector<PairRecord>& pairs, int latent_factor);

struct FlowSetup;

/// Pairs from flow.pair_scenes fresh scenes (seeds pair_seed, pair_seed + 1, ...)
/// at every sparsity level.
std::vector<PairRecord> generate_training_pairs(const SceneSetup& scene, const ReconConfig& recon,
                                                const FlowSetup& flow, int n_refs,
                                                std::vector<std::string>* warnings = nullptr);

/// CFM training of a fresh model (seeded by flow.train.seed) on the pairs.
nn::VelocityModel train_flow_model(const std::vector<PairRecord>& pairs, const FlowSetup& flow,
                                   nn::TrainResult* result = nullptr);

/// Binary pair file "FLWRPAR1" holding every field in double precision.
void save_pairs(const std::vector<PairRecord>& pairs, const std::string& path);
std::vector<PairRecord> load_pairs(const std::string& path);

}  // namespace splatflow::pipeline
