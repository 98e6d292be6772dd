#pragma once

// Outer Reptile loop over an inner, accuracy-gated adversarial loop.
//
// The outer (master) parameters are kept in double precision; each epoch's
// clones are cast to float for the inner loop. Checkpoints hold float32.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metalgan/checkpoint.hpp"
#include "metalgan/dataset.hpp"
#include "metalgan/losses.hpp"
#include "metalgan/networks.hpp"

namespace metalgan {

struct ModelConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;

  static ModelConfig desk() { return {GeneratorConfig::desk(), DiscriminatorConfig::desk()}; }
  bool operator==(const ModelConfig&) const = default;
};

/// Settings shared by every inner loop, whether training or inference.
struct InnerSettings {
  double lambda_g = 1e-4;
  double lambda_d = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::size_t batch_size = 8;
  losses::LossWeights weights;
  double gate_low = 0.5;   // t: G steps when accuracy > t (or at i = 0)
  double gate_high = 0.9;  // T: D steps when accuracy < T

  void validate() const;
};

struct TrainHyperParams {
  std::size_t n_epochs = 2000;
  double lambda_ml = 0.01;
  std::size_t n_meta_iter = 20;
  std::size_t checkpoint_interval = 100;
  InnerSettings inner;

  static TrainHyperParams desk() { return {}; }
  static TrainHyperParams full_scale();

  void validate() const;
};

struct InnerLogEntry {
  std::size_t iteration = 0;
  losses::LossBundle losses;
  bool d_updated = false;
  bool g_updated = false;
};

/// Everything an inner loop reads besides the parameters.
struct InnerData {
  const ImageStore* images = nullptr;
  std::vector<std::string> global_pool;  // x is drawn from here
};

/// Builds InnerData over the train split of a dataset.
InnerData make_inner_data(const DatasetIndex& index, const ImageStore& images);

struct InnerStreams {
  Rng y;  // task batches
  Rng x;  // global batches
};

struct InnerResult {
  ParameterSet<float> generator;
  ParameterSet<float> discriminator;
  std::vector<InnerLogEntry> log;
};

/// Runs n_iter gated iterations on clones. Throws TrainingError on a
/// non-finite loss, naming the term and the iteration.
InnerResult run_inner_loop(const Generator& generator, const Discriminator& discriminator,
                           ParameterSet<float> g_params, ParameterSet<float> d_params, const TaskDataset& task,
                           const InnerData& data, const InnerSettings& settings, std::size_t n_iter,
                           InnerStreams& streams);

struct TrainLogRow {
  std::uint64_t epoch = 0;
  std::string task;
  InnerLogEntry entry;
};

std::string train_log_header();
std::string format_train_log_row(const TrainLogRow& row);

/// Snapshot handed to the observer after each epoch's outer update.
struct EpochView {
  std::uint64_t epoch = 0;  // 1-based count of completed epochs
  const std::string& task;
  const ParameterSet<double>& g_before;
  const ParameterSet<double>& d_before;
  const ParameterSet<float>& g_inner;
  const ParameterSet<float>& d_inner;
  const ParameterSet<double>& g_after;
  const ParameterSet<double>& d_after;
};

struct TrainOptions {
  /// When set, receives `checkpoint.bin` (interval and final) and `train_log.csv`.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const EpochView&)> observer;
  bool keep_log_in_memory = true;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
};

/// Thrown when a checkpoint cannot be written. Carries the state reached.
class TrainingHalted : public TrainingError {
 public:
  TrainingHalted(const std::string& what, TrainResult partial) : TrainingError(what), partial_(std::move(partial)) {}
  const TrainResult& partial() const { return partial_; }

 private:
  TrainResult partial_;
};

/// Meta-trains from a seeded initialization on the given tasks.
TrainResult run_training(const ModelConfig& model, const std::vector<TaskDataset>& tasks, const InnerData& data,
                         const TrainHyperParams& hp, std::uint64_t seed, const TrainOptions& options = {});

/// Rounds master parameters into a checkpoint.
Checkpoint make_checkpoint(const ModelConfig& model, const ParameterSet<double>& g, const ParameterSet<double>& d,
                           std::uint64_t epoch, const std::string& rng_state);

}  // namespace metalgan
