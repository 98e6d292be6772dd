#pragma once

// Few-shot fine-tuning on unseen domains and per-domain specialization.
// Neither operation mutates its input checkpoint.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metalgan/trainer.hpp"

namespace metalgan {

struct InferHyperParams {
  std::size_t n_inf_epochs = 10;
  double lambda_ml = 0.1;
  std::size_t n_inf_train = 20;
  std::size_t n_inf_test = 100;
  std::size_t few_shot = 320;  // images per unseen domain
  InnerSettings inner = default_inner();

  static InnerSettings default_inner() {
    InnerSettings s;
    s.weights = {100.0, 100.0, 1.0, 1.0};
    return s;
  }
  static InferHyperParams desk() { return {}; }
  static InferHyperParams full_scale();

  void validate() const;
};

/// Warning lines for unseen domains that are also training domains.
std::vector<std::string> overlap_warnings(const std::vector<std::string>& train_domains,
                                          const std::vector<std::string>& unseen_domains);

/// For each epoch, for each task in list order: clone, inner loop, Reptile.
/// The observer sees every outer displacement.
Checkpoint fine_tune_unseen(const Checkpoint& checkpoint, const std::vector<TaskDataset>& tasks,
                            const InnerData& data, const InferHyperParams& hp, std::uint64_t seed,
                            const std::function<void(const EpochView&)>& observer = {});

/// Inner-trains a throwaway clone on one domain for N_inf_test iterations,
/// then translates every input image with it.
ImageBatch specialize_and_generate(const Checkpoint& checkpoint, const TaskDataset& domain, const ImageBatch& inputs,
                                   const InnerData& data, const InferHyperParams& hp, std::uint64_t seed);

/// Translation with the stored generator, no specialization.
ImageBatch generate(const Checkpoint& checkpoint, const ImageBatch& inputs);

}  // namespace metalgan
