// metalgan: synth | train | infer | eval | ablate
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metalgan/pipeline.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Flag values as given on the command line, keyed by config key.
struct Overrides {
  std::optional<std::string> config;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;
  bool no_finetune = false;
  bool seen = false;
};

void add_value(CLI::App* app, Overrides& o, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&o, key](const std::string& v) { o.values[key] = v; }, help);
}

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "flat key = value config file; flags override it");
  add_value(app, o, "--seed", "seed", "random seed");
  add_value(app, o, "--out", "out_dir", "output directory");
  add_value(app, o, "--data", "data_dir", "dataset directory");
  app->add_option("--set", o.sets, "extra KEY=VALUE config override (repeatable)");
}

void add_model_flags(CLI::App* app, Overrides& o) {
  add_value(app, o, "--train-domains", "train_domains", "comma-separated training domains");
  add_value(app, o, "--unseen", "unseen_domains", "comma-separated unseen domains");
  add_value(app, o, "--epochs", "N_epochs", "number of meta-training epochs");
  add_value(app, o, "--lambda_ml", "lambda_ml", "meta-learning rate");
  for (const char* w : {"w_adv", "w_dom", "w_rec", "w_feat"})
    add_value(app, o, std::string("--") + w, w, std::string("training loss weight ") + w);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-free multi-domain image translation with meta-learning"};
  app.require_subcommand(1);
  Overrides o;

  auto* synth = app.add_subcommand("synth", "generate the synthetic attribute dataset");
  add_common(synth, o);
  add_value(synth, o, "--count", "count", "number of images");
  add_value(synth, o, "--image-size", "image_size", "image side length in pixels");

  auto* train = app.add_subcommand("train", "meta-train on the training domains");
  add_common(train, o);
  add_model_flags(train, o);

  auto* infer = app.add_subcommand("infer", "fine-tune on unseen domains, specialize and generate");
  add_common(infer, o);
  add_model_flags(infer, o);
  add_value(infer, o, "--checkpoint", "checkpoint", "trained checkpoint");
  infer->add_flag("--no-finetune", o.no_finetune, "skip fine-tuning; specialization only");
  infer->add_flag("--seen", o.seen, "generate for the training domains instead of the unseen ones");

  auto* evaluate = app.add_subcommand("eval", "score generated images");
  add_common(evaluate, o);
  add_value(evaluate, o, "--gen", "gen_dir", "directory written by infer");
  add_value(evaluate, o, "--embedder", "embedder", "random_conv | disc_tap | raw_pixels");

  auto* ablate = app.add_subcommand("ablate", "default vs w_dom = 0 paired runs");
  add_common(ablate, o);
  add_model_flags(ablate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const std::string mode = app.get_subcommands().front()->get_name();
  metalgan::RunConfig config;
  try {
    if (o.config) metalgan::apply_config_file(config, *o.config);
    config.mode = mode;
    for (const auto& [key, value] : o.values) config.set(key, value);
    for (const auto& kv : o.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw metalgan::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.no_finetune) config.finetune = false;
    if (o.seen) config.seen = true;
    config.validate();
  } catch (const metalgan::ConfigError& e) {
    std::cerr << "metalgan " << mode << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "metalgan " << mode << ": " << e.what() << "\n";
    return kExitRuntime;
  }

  const auto log = metalgan::stderr_log();
  try {
    if (mode == "synth") metalgan::cmd_synth(config, log);
    if (mode == "train") metalgan::cmd_train(config, log);
    if (mode == "infer") metalgan::cmd_infer(config, log);
    if (mode == "eval") metalgan::cmd_eval(config, log);
    if (mode == "ablate") metalgan::cmd_ablate(config, log);
  } catch (const std::exception& e) {
    std::cerr << "metalgan " << mode << ": " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
