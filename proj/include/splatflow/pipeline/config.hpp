#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "splatflow/nn/model.hpp"
#include "splatflow/nn/train.hpp"
#include "splatflow/pipeline/refine.hpp"

namespace splatflow::pipeline {

struct FlowSetup {
  nn::ModelConfig model;
  nn::TrainConfig train;
  FlowGlue glue;
  std::vector<int> sparsity_levels{3, 4, 6, 8};
  int pair_scenes = 4;
  uint64_t pair_seed = 1000;  // pair scenes use pair_seed, pair_seed + 1, ...
};

struct PipelineConfig {
  uint64_t seed = 0;
  SceneSetup scene;
  int input_views = 12;
  ReconConfig recon;
  RefineConfig refine;
  FlowSetup flow;
  double eval_opacity_threshold = -1.0;  // < 0: no thresholding

  PipelineConfig();
  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

/// One "section.key" entry of the config schema.
struct ConfigField {
  std::string section;
  std::string key;
  std::string doc;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

/// Schema bound to `cfg`: every field that can be read from or printed to a file.
std::vector<ConfigField> config_fields(PipelineConfig& cfg);

/// Applies "key = value" lines under "[section]" headers. '#' and ';' start
/// comments. Unknown sections/keys or unparsable values throw ConfigError.
void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& origin = "<config>");
void apply_config_file(PipelineConfig& cfg, const std::string& path);
/// "section.key=value".
void apply_override(PipelineConfig& cfg, const std::string& assignment);

/// Every field with its current value and a comment, in INI form.
void print_config(PipelineConfig& cfg, std::ostream& os);

}  // namespace splatflow::pipeline
