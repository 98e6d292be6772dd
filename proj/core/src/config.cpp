#include "metalgan/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "metalgan/synthetic.hpp"

namespace metalgan {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const auto u = std::stoull(v, &used);
      if (used == v.size()) return u;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Key {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define KEY_UINT(name, field) \
  {name, {[](RunConfig& c, const std::string& v) { c.field = to_uint(name, v); }, [](const RunConfig& c) { return std::to_string(c.field); }}}
#define KEY_INT(name, field) \
  {name, {[](RunConfig& c, const std::string& v) { c.field = static_cast<int>(to_uint(name, v)); }, [](const RunConfig& c) { return std::to_string(c.field); }}}
#define KEY_DOUBLE(name, field) \
  {name, {[](RunConfig& c, const std::string& v) { c.field = to_double(name, v); }, [](const RunConfig& c) { return num(c.field); }}}
#define KEY_BOOL(name, field) \
  {name, {[](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); }, [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}}
#define KEY_STRING(name, field) \
  {name, {[](RunConfig& c, const std::string& v) { c.field = v; }, [](const RunConfig& c) { return std::string(c.field); }}}
#define KEY_LIST(name, field) \
  {name, {[](RunConfig& c, const std::string& v) { c.field = split_list(v); }, [](const RunConfig& c) { return join(c.field); }}}

// Ordered as written in the echo.
const std::vector<std::pair<std::string, Key>>& keys() {
  static const std::vector<std::pair<std::string, Key>> k = {
      KEY_STRING("mode", mode),
      KEY_UINT("seed", seed),
      {"data_dir", {[](RunConfig& c, const std::string& v) { c.data_dir = v; }, [](const RunConfig& c) { return c.data_dir.string(); }}},
      {"out_dir", {[](RunConfig& c, const std::string& v) { c.out_dir = v; }, [](const RunConfig& c) { return c.out_dir.string(); }}},
      {"checkpoint", {[](RunConfig& c, const std::string& v) { c.checkpoint = v; }, [](const RunConfig& c) { return c.checkpoint.string(); }}},
      {"gen_dir", {[](RunConfig& c, const std::string& v) { c.gen_dir = v; }, [](const RunConfig& c) { return c.gen_dir.string(); }}},
      KEY_LIST("train_domains", train_domains),
      KEY_LIST("unseen_domains", unseen_domains),
      KEY_INT("image_size", image_size),
      KEY_UINT("count", count),
      KEY_INT("g_base_channels", model.generator.base_channels),
      KEY_INT("g_n_downsample", model.generator.n_downsample),
      KEY_INT("g_n_residual", model.generator.n_residual),
      KEY_BOOL("g_skip_connections", model.generator.skip_connections),
      KEY_INT("d_base_channels", model.discriminator.base_channels),
      KEY_INT("d_n_layers", model.discriminator.n_layers),
      KEY_UINT("N_epochs", train.n_epochs),
      KEY_DOUBLE("lambda_ml", train.lambda_ml),
      KEY_DOUBLE("lambda_G", train.inner.lambda_g),
      KEY_DOUBLE("lambda_D", train.inner.lambda_d),
      KEY_DOUBLE("beta1", train.inner.beta1),
      KEY_DOUBLE("beta2", train.inner.beta2),
      KEY_UINT("N_meta_iter", train.n_meta_iter),
      KEY_UINT("batch_size", train.inner.batch_size),
      KEY_DOUBLE("w_adv", train.inner.weights.adv),
      KEY_DOUBLE("w_dom", train.inner.weights.dom),
      KEY_DOUBLE("w_rec", train.inner.weights.rec),
      KEY_DOUBLE("w_feat", train.inner.weights.feat),
      KEY_DOUBLE("t", train.inner.gate_low),
      KEY_DOUBLE("T", train.inner.gate_high),
      KEY_UINT("checkpoint_interval", train.checkpoint_interval),
      KEY_UINT("N_inf_epochs", infer.n_inf_epochs),
      KEY_DOUBLE("inf.lambda_ml", infer.lambda_ml),
      KEY_DOUBLE("inf.lambda_G", infer.inner.lambda_g),
      KEY_DOUBLE("inf.lambda_D", infer.inner.lambda_d),
      KEY_DOUBLE("inf.beta1", infer.inner.beta1),
      KEY_DOUBLE("inf.beta2", infer.inner.beta2),
      KEY_UINT("N_inf_train", infer.n_inf_train),
      KEY_UINT("N_inf_test", infer.n_inf_test),
      KEY_UINT("inf.batch_size", infer.inner.batch_size),
      KEY_DOUBLE("inf.w_adv", infer.inner.weights.adv),
      KEY_DOUBLE("inf.w_dom", infer.inner.weights.dom),
      KEY_DOUBLE("inf.w_rec", infer.inner.weights.rec),
      KEY_DOUBLE("inf.w_feat", infer.inner.weights.feat),
      KEY_DOUBLE("inf.t", infer.inner.gate_low),
      KEY_DOUBLE("inf.T", infer.inner.gate_high),
      KEY_UINT("few_shot", infer.few_shot),
      KEY_BOOL("finetune", finetune),
      KEY_BOOL("seen", seen),
      KEY_UINT("eval_inputs", eval_inputs),
      KEY_STRING("embedder", embedder),
      KEY_UINT("fid_samples", fid_samples),
      KEY_UINT("prd_clusters", prd_clusters),
      KEY_UINT("prd_grid", prd_grid),
      KEY_UINT("kmeans_seed", kmeans_seed),
  };
  return k;
}

}  // namespace

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, k] : keys())
    if (name == key) {
      k.set(*this, trim(value));
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  static const std::vector<std::string> modes{"synth", "train", "infer", "eval", "ablate"};
  if (std::find(modes.begin(), modes.end(), mode) == modes.end()) throw ConfigError("unknown mode '" + mode + "'");
  if (out_dir.empty()) throw ConfigError(mode + ": an output directory is required (--out)");
  if (mode != "synth" && data_dir.empty()) throw ConfigError(mode + ": a dataset directory is required (--data)");
  if (mode == "infer" && checkpoint.empty()) throw ConfigError("infer: a checkpoint is required (--checkpoint)");
  if (mode == "eval" && gen_dir.empty()) throw ConfigError("eval: a generation directory is required (--gen)");
  if (mode == "synth") {
    synthetic::SyntheticSpec{image_size, count, seed}.validate();
    return;
  }
  for (const auto& u : unseen_domains)
    if (std::find(train_domains.begin(), train_domains.end(), u) != train_domains.end() && mode != "infer")
      throw ConfigError("domain '" + u + "' is listed both as a training and an unseen domain");
  if ((mode == "train" || mode == "ablate") && train_domains.empty())
    throw ConfigError(mode + ": at least one training domain is required");
  model.generator.validate();
  model.discriminator.validate();
  train.validate();
  infer.validate();
  if (eval_inputs == 0) throw ConfigError("eval_inputs must be >= 1");
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(config, buf.str(), path.string());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, k] : keys()) out += name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace metalgan
