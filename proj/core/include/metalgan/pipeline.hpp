#pragma once

// End-to-end commands on directories. Each command writes
// `<out_dir>/<mode>_config.txt`, an echo from which it can be re-run.
//
// Layouts:
//   synth : images/<id>.png, attributes.txt, manifest.json
//   train : checkpoint.bin, train_log.csv
//   infer : <domain>/<input_id>.png, generation_manifest.json,
//           finetuned_checkpoint.bin (when fine-tuning ran)
//   eval  : metrics.csv, fid_bar.png, prd_<domain>.png, contact_<domain>.png
//   ablate: default/ and no_dom/ subtrees plus ablation_summary.csv

#include <functional>
#include <string>
#include <vector>

#include "metalgan/config.hpp"
#include "metalgan/evaluation.hpp"

namespace metalgan {

using LogSink = std::function<void(const std::string&)>;

/// Writes lines to stderr prefixed with "metalgan: ".
LogSink stderr_log();

void cmd_synth(const RunConfig& config, const LogSink& log);
void cmd_train(const RunConfig& config, const LogSink& log);
void cmd_infer(const RunConfig& config, const LogSink& log);
std::vector<eval::MetricRow> cmd_eval(const RunConfig& config, const LogSink& log);

struct AblationSummary {
  double mean_success_default = 0;
  double mean_success_no_dom = 0;
};
AblationSummary cmd_ablate(const RunConfig& config, const LogSink& log);

/// Held-out inputs for a domain: test-split images not already in it, in index
/// order, at most `count`.
std::vector<std::string> evaluation_inputs(const LoadedDataset& data, const DomainSpec& domain, std::size_t count);

/// Domain tasks over the train split, optionally few-shot restricted.
std::vector<TaskDataset> make_tasks(const LoadedDataset& data, const std::vector<std::string>& domains,
                                    std::optional<std::size_t> few_shot, std::uint64_t seed);

}  // namespace metalgan
