#include "metalgan/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metalgan/image_io.hpp"
#include "metalgan/synthetic.hpp"

namespace metalgan {
namespace {

namespace fs = std::filesystem;

enum Stream : std::uint64_t { kFewShot = 40 };

constexpr std::size_t kProgressEvery = 50;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void prepare_out(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create '" + config.out_dir.string() + "': " + ec.message());
  write_text(config.out_dir / (config.mode + "_config.txt"), format_config(config));
}

double mean_success(const std::vector<eval::MetricRow>& rows) {
  if (rows.empty()) return 0.0;
  double acc = 0;
  for (const auto& r : rows) acc += r.success_rate;
  return acc / static_cast<double>(rows.size());
}

}  // namespace

LogSink stderr_log() {
  return [](const std::string& line) { std::cerr << "metalgan: " << line << '\n'; };
}

std::vector<TaskDataset> make_tasks(const LoadedDataset& data, const std::vector<std::string>& domains,
                                    std::optional<std::size_t> few_shot, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TaskDataset> tasks;
  for (const auto& name : domains)
    tasks.push_back(restrict_to_domain(data.index, data.table, DomainSpec::from_name(name), few_shot, rng));
  return tasks;
}

std::vector<std::string> evaluation_inputs(const LoadedDataset& data, const DomainSpec& domain, std::size_t count) {
  std::vector<std::string> out;
  for (const auto& id : data.index.ids(Split::kTest)) {
    if (out.size() == count) break;
    if (data.table.value(id, domain.attribute) != domain.required_sign) out.push_back(id);
  }
  if (out.empty()) throw DatasetError("no held-out inputs outside domain '" + domain.name + "'");
  return out;
}

void cmd_synth(const RunConfig& config, const LogSink& log) {
  config.validate();
  prepare_out(config);
  const synthetic::SyntheticSpec spec{config.image_size, config.count, config.seed};
  const auto data = synthetic::generate_synthetic_dataset(spec);
  synthetic::write_synthetic_dataset(data, spec, config.out_dir);
  log("wrote " + std::to_string(config.count) + " images to " + config.out_dir.string());
}

void cmd_train(const RunConfig& config, const LogSink& log) {
  config.validate();
  prepare_out(config);
  const auto data = load_dataset_dir(config.data_dir, config.seed);
  const auto tasks = make_tasks(data, config.train_domains, std::nullopt, config.seed);
  for (const auto& t : tasks) log("domain " + t.domain.name + ": " + std::to_string(t.member_ids.size()) + " images");
  const auto inner = make_inner_data(data.index, data.images);

  const auto start = std::chrono::steady_clock::now();
  TrainOptions options;
  options.out_dir = config.out_dir;
  options.keep_log_in_memory = false;
  options.observer = [&](const EpochView& v) {
    if (v.epoch % kProgressEvery != 0 && v.epoch != config.train.n_epochs) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %llu/%zu (%.0f s)", static_cast<unsigned long long>(v.epoch),
                  config.train.n_epochs, s);
    log(buf);
  };
  const auto result = run_training(config.model, tasks, inner, config.train, config.seed, options);
  log("checkpoint " + (config.out_dir / "checkpoint.bin").string() + " hash " +
      file_hash(config.out_dir / "checkpoint.bin"));
}

void cmd_infer(const RunConfig& config, const LogSink& log) {
  config.validate();
  prepare_out(config);
  const Checkpoint trained = load_checkpoint(config.checkpoint);
  const std::string trained_hash = file_hash(config.checkpoint);
  const auto data = load_dataset_dir(config.data_dir, config.seed);
  const auto inner = make_inner_data(data.index, data.images);

  const auto& domains = config.seen ? config.train_domains : config.unseen_domains;
  if (domains.empty()) throw ConfigError("infer: no domains to generate for");
  if (!config.seen)
    for (const auto& w : overlap_warnings(config.train_domains, config.unseen_domains)) log("warning: " + w);

  std::optional<std::size_t> few_shot;
  if (!config.seen) few_shot = config.infer.few_shot;
  const auto tasks = make_tasks(data, domains, few_shot, derive_seed(config.seed, kFewShot));

  Checkpoint model = trained;
  bool finetuned = false;
  if (!config.seen && config.finetune) {
    model = fine_tune_unseen(trained, tasks, inner, config.infer, config.seed);
    save_checkpoint(model, config.out_dir / "finetuned_checkpoint.bin");
    finetuned = true;
    log("fine-tuned on " + std::to_string(tasks.size()) + " unseen domains");
  }

  nlohmann::json manifest;
  manifest["phase"] = config.seen ? "train" : "unseen";
  manifest["checkpoint"] = config.checkpoint.string();
  manifest["checkpoint_hash"] = trained_hash;
  manifest["finetuned"] = finetuned;
  if (finetuned) manifest["finetuned_checkpoint_hash"] = file_hash(config.out_dir / "finetuned_checkpoint.bin");
  manifest["seed"] = config.seed;
  manifest["config"] = format_config(config);
  manifest["domains"] = nlohmann::json::array();

  for (const auto& task : tasks) {
    const auto ids = evaluation_inputs(data, task.domain, config.eval_inputs);
    const auto inputs = stack_images(data.images, ids);
    const auto outputs = specialize_and_generate(model, task, inputs, inner, config.infer, config.seed);
    const fs::path dir = config.out_dir / task.domain.name;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < ids.size(); ++i)
      write_png((dir / (ids[i] + ".png")).string(), from_tensor(batch_item(outputs, i)));
    manifest["domains"].push_back({{"name", task.domain.name}, {"inputs", ids}});
    log("generated " + std::to_string(ids.size()) + " images for " + task.domain.name);
  }
  write_text(config.out_dir / "generation_manifest.json", manifest.dump(2) + "\n");
  if (file_hash(config.checkpoint) != trained_hash)
    throw TrainingError("checkpoint '" + config.checkpoint.string() + "' changed during inference");
}

std::vector<eval::MetricRow> cmd_eval(const RunConfig& config, const LogSink& log) {
  config.validate();
  prepare_out(config);
  const auto manifest_path = config.gen_dir / "generation_manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + manifest_path.string() + "': " + e.what());
  }
  const auto data = load_dataset_dir(config.data_dir, config.seed);
  std::optional<Checkpoint> checkpoint;
  if (config.embedder == eval::kDiscriminatorEmbedder) {
    checkpoint = load_checkpoint(manifest.at("finetuned").get<bool>()
                                     ? config.gen_dir / "finetuned_checkpoint.bin"
                                     : fs::path(manifest.at("checkpoint").get<std::string>()));
    log("warning: the discriminator tap is not a neutral embedder");
  }
  const Checkpoint* ck = checkpoint ? &*checkpoint : nullptr;

  std::vector<eval::MetricRow> rows;
  std::vector<eval::DomainArtifacts> artifacts;
  for (const auto& entry : manifest.at("domains")) {
    const std::string name = entry.at("name");
    const DomainSpec domain = DomainSpec::from_name(name);
    const auto ids = entry.at("inputs").get<std::vector<std::string>>();
    std::vector<Tensor<float>> gen;
    for (const auto& id : ids) gen.push_back(to_tensor(read_png((config.gen_dir / name / (id + ".png")).string())));
    const auto outputs = stack(gen);
    const auto inputs = stack_images(data.images, ids);
    const auto scores = eval::domain_transfer_report(outputs, inputs, domain);

    std::vector<std::string> ref_ids;
    for (const auto& r : data.index.records()) {
      if (ref_ids.size() == config.fid_samples) break;
      if (data.table.value(r.id, domain.attribute) == domain.required_sign) ref_ids.push_back(r.id);
    }
    if (ref_ids.empty()) throw DatasetError("no reference images for domain '" + name + "'");
    const auto ref = eval::embed(stack_images(data.images, ref_ids), config.embedder, name + " reference", ck);
    const auto out = eval::embed(outputs, config.embedder, name + " generated", ck);
    if (out.n < out.d + 1 || ref.n < ref.d + 1)
      throw ConfigError("domain '" + name + "': FID needs at least " + std::to_string(out.d + 1) +
                        " samples per set, got " + std::to_string(out.n) + " generated and " +
                        std::to_string(ref.n) + " reference");
    std::vector<std::string> warnings;
    const double f = eval::fid(ref, out, &warnings);
    auto pr = eval::prd(ref, out, config.prd_clusters, config.prd_grid, config.kmeans_seed);
    warnings.insert(warnings.end(), pr.warnings.begin(), pr.warnings.end());
    for (const auto& w : warnings) log("warning: " + name + ": " + w);

    eval::MetricRow row{manifest.at("phase"), name,       f,        eval::prd_auc(pr.curve),
                        scores.success_rate,   scores.identity_l1, scores.preservation_rate,
                        scores.n,              config.embedder,    manifest.at("seed").get<std::uint64_t>()};
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: success %.3f identity_l1 %.4f fid %.4f prd_auc %.3f", name.c_str(),
                  row.success_rate, row.identity_l1, row.fid, row.prd_auc);
    log(buf);
    rows.push_back(row);
    artifacts.push_back({name, std::move(pr.curve), inputs, outputs});
  }
  eval::emit_report(rows, artifacts, config.out_dir);
  return rows;
}

AblationSummary cmd_ablate(const RunConfig& config, const LogSink& log) {
  config.validate();
  prepare_out(config);
  AblationSummary summary;
  for (const bool no_dom : {false, true}) {
    const fs::path root = config.out_dir / (no_dom ? "no_dom" : "default");
    RunConfig c = config;
    if (no_dom) {
      c.train.inner.weights.dom = 0;
      c.infer.inner.weights.dom = 0;
    }
    c.mode = "train";
    c.out_dir = root / "train";
    cmd_train(c, log);
    c.mode = "infer";
    c.seen = true;
    c.checkpoint = root / "train" / "checkpoint.bin";
    c.out_dir = root / "gen";
    cmd_infer(c, log);
    c.mode = "eval";
    c.gen_dir = root / "gen";
    c.out_dir = root / "eval";
    const double m = mean_success(cmd_eval(c, log));
    (no_dom ? summary.mean_success_no_dom : summary.mean_success_default) = m;
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "variant,mean_success\ndefault,%.17g\nno_dom,%.17g\n", summary.mean_success_default,
                summary.mean_success_no_dom);
  write_text(config.out_dir / "ablation_summary.csv", buf);
  log(std::string("ablation: mean success default ") + std::to_string(summary.mean_success_default) + ", w_dom=0 " +
      std::to_string(summary.mean_success_no_dom));
  return summary;
}

}  // namespace metalgan
