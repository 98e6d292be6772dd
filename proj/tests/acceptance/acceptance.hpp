#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "metalgan/pipeline.hpp"

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Desk-scale artifacts under one working directory. Each stage is skipped
/// when its config echo matches and its product is complete; a stage that
/// runs forces every stage depending on it to run again.
class Desk {
 public:
  explicit Desk(std::filesystem::path work);

  const metalgan::LoadedDataset& data();
  std::filesystem::path data_dir();

  struct Run {
    std::filesystem::path train_dir;
    std::vector<metalgan::eval::MetricRow> seen_metrics;
    std::filesystem::path metrics_csv;
  };
  /// Train, generate for the training domains and evaluate.
  Run seen_run(const std::string& name, bool no_dom);

  /// Generate for the unseen domains from run_a with or without fine-tuning,
  /// then evaluate.
  std::vector<metalgan::eval::MetricRow> unseen_run(std::uint64_t seed, bool finetune);

  const std::filesystem::path& work() const { return work_; }

 private:
  metalgan::RunConfig base(const std::string& mode, const std::filesystem::path& out) const;
  bool train(const metalgan::RunConfig& c);
  bool infer(const metalgan::RunConfig& c, bool upstream_ran);
  std::vector<metalgan::eval::MetricRow> eval(const metalgan::RunConfig& c, bool upstream_ran);

  std::filesystem::path work_;
  bool data_checked_ = false;
  std::optional<metalgan::LoadedDataset> data_;
  metalgan::LogSink log_;
};

Outcome reptile_identity(Desk& desk);
Outcome gating_soundness(Desk& desk);
Outcome gradient_check();
Outcome metric_unit_cases();
Outcome desk_transfer(Desk& desk);
Outcome unseen_finetune(Desk& desk);
Outcome domain_loss_ablation(Desk& desk);
Outcome determinism(Desk& desk);

}  // namespace acceptance
