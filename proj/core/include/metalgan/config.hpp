#pragma once

// Flat `key = value` run configuration. Hyper-parameter keys use the symbol
// names of the training and inference tables (N_epochs, lambda_ml, lambda_G,
// w_dom, t, T, ...); inference-phase values carry an `inf.` prefix where the
// symbol is shared with training.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metalgan/inference.hpp"

namespace metalgan {

struct RunConfig {
  std::string mode;  // synth | train | infer | eval | ablate
  std::uint64_t seed = 0;

  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::filesystem::path checkpoint;  // infer
  std::filesystem::path gen_dir;     // eval

  std::vector<std::string> train_domains{"black_hair", "blond_hair", "eyeglasses", "pale_skin", "mustache"};
  std::vector<std::string> unseen_domains{"gray_hair", "bushy_eyebrows", "smiling"};

  // synth
  int image_size = 32;
  std::size_t count = 5000;

  ModelConfig model = ModelConfig::desk();
  TrainHyperParams train = TrainHyperParams::desk();
  InferHyperParams infer = InferHyperParams::desk();

  // infer
  bool finetune = true;
  bool seen = false;  // generate for the training domains instead of the unseen ones
  std::size_t eval_inputs = 200;

  // eval
  std::string embedder = "random_conv";
  std::size_t fid_samples = 1000;
  std::size_t prd_clusters = 20;
  std::size_t prd_grid = 1001;
  std::uint64_t kmeans_seed = 0;

  /// Sets one key. Throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Mode-specific checks: required paths, disjoint domain lists, hp ranges.
  void validate() const;
};

/// Applies every `key = value` line; `#` starts a comment.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& source = "<config>");
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Complete echo; re-applying it to a default RunConfig reproduces `config`.
std::string format_config(const RunConfig& config);

std::vector<std::string> split_list(const std::string& csv);

}  // namespace metalgan
