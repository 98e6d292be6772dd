#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "acceptance.hpp"
#include "metalgan/checkpoint.hpp"

namespace acceptance {
namespace {

using namespace metalgan;
namespace fs = std::filesystem;

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool echo_matches(const RunConfig& c) {
  return read_text(c.out_dir / (c.mode + "_config.txt")) == format_config(c);
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double mean_success(const std::vector<eval::MetricRow>& rows) {
  double acc = 0;
  for (const auto& r : rows) acc += r.success_rate;
  return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
}

}  // namespace

Desk::Desk(fs::path work) : work_(std::move(work)), log_(stderr_log()) {}

RunConfig Desk::base(const std::string& mode, const fs::path& out) const {
  RunConfig c;
  c.mode = mode;
  c.seed = 0;
  c.data_dir = work_ / "data";
  c.out_dir = out;
  return c;
}

fs::path Desk::data_dir() {
  if (!data_checked_) {
    RunConfig c = base("synth", work_ / "data");
    c.data_dir.clear();
    if (!echo_matches(c) || !fs::exists(c.out_dir / "manifest.json")) {
      log_("generating the desk dataset in " + c.out_dir.string());
      cmd_synth(c, log_);
    }
    data_checked_ = true;
  }
  return work_ / "data";
}

const LoadedDataset& Desk::data() {
  if (!data_) data_ = load_dataset_dir(data_dir(), 0);
  return *data_;
}

bool Desk::train(const RunConfig& c) {
  data_dir();
  if (echo_matches(c) && fs::exists(c.out_dir / "checkpoint.bin") &&
      load_checkpoint(c.out_dir / "checkpoint.bin").epoch == c.train.n_epochs) {
    log_("reusing " + c.out_dir.string());
    return false;
  }
  cmd_train(c, log_);
  return true;
}

bool Desk::infer(const RunConfig& c, bool upstream_ran) {
  const auto manifest_path = c.out_dir / "generation_manifest.json";
  if (!upstream_ran && echo_matches(c) && fs::exists(manifest_path)) {
    const auto manifest = nlohmann::json::parse(read_text(manifest_path));
    if (manifest.at("checkpoint_hash") == file_hash(c.checkpoint)) {
      log_("reusing " + c.out_dir.string());
      return false;
    }
  }
  cmd_infer(c, log_);
  return true;
}

std::vector<eval::MetricRow> Desk::eval(const RunConfig& c, bool upstream_ran) {
  const auto csv = c.out_dir / "metrics.csv";
  if (!upstream_ran && echo_matches(c) && fs::exists(c.out_dir / "fid_bar.png")) {
    log_("reusing " + c.out_dir.string());
    return eval::parse_metrics_csv(read_text(csv));
  }
  return cmd_eval(c, log_);
}

Desk::Run Desk::seen_run(const std::string& name, bool no_dom) {
  const fs::path root = work_ / name;
  RunConfig c = base("train", root / "train");
  if (no_dom) {
    c.train.inner.weights.dom = 0;
    c.infer.inner.weights.dom = 0;
  }
  bool ran = train(c);
  const fs::path checkpoint = c.out_dir / "checkpoint.bin";

  c.mode = "infer";
  c.seen = true;
  c.checkpoint = checkpoint;
  c.out_dir = root / "gen_seen";
  ran = infer(c, ran) || ran;

  c.mode = "eval";
  c.gen_dir = root / "gen_seen";
  c.out_dir = root / "eval_seen";
  const auto rows = eval(c, ran);
  return {checkpoint.parent_path(), rows, c.out_dir / "metrics.csv"};
}

std::vector<eval::MetricRow> Desk::unseen_run(std::uint64_t seed, bool finetune) {
  const auto trained = seen_run("run_a", false);
  const fs::path root = work_ / "unseen" / ("seed" + std::to_string(seed)) / (finetune ? "ft" : "noft");
  RunConfig c = base("infer", root / "gen");
  c.seed = seed;
  c.finetune = finetune;
  c.checkpoint = trained.train_dir / "checkpoint.bin";
  const bool ran = infer(c, false);
  c.mode = "eval";
  c.gen_dir = root / "gen";
  c.out_dir = root / "eval";
  return eval(c, ran);
}

Outcome gating_soundness(Desk& desk) {
  const auto run = desk.seen_run("run_a", false);
  const RunConfig defaults;
  const auto start = std::chrono::steady_clock::now();
  std::ifstream in(run.train_dir / "train_log.csv");
  std::string line;
  std::getline(in, line);
  if (line != train_log_header()) return {false, "unexpected train_log.csv header"};
  std::size_t rows = 0, d_violations = 0, g_violations = 0, first_iters = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 14) return {false, "malformed row " + std::to_string(rows + 1)};
    ++rows;
    const bool first = std::stoull(f[1]) == 0;
    const double accuracy = std::stod(f[11]);
    const bool d_updated = f[12] == "1", g_updated = f[13] == "1";
    d_violations += d_updated && accuracy >= defaults.train.inner.gate_high;
    if (first) {
      ++first_iters;
      g_violations += !g_updated;
    }
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::size_t expected = defaults.train.n_epochs * defaults.train.n_meta_iter;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%zu rows (expected %zu), %zu D updates at accuracy >= T, %zu of %zu first iterations without a G "
                "update, scan %.2f s",
                rows, expected, d_violations, g_violations, first_iters, s);
  return {rows == expected && first_iters == defaults.train.n_epochs && d_violations == 0 && g_violations == 0 && s < 1,
          buf};
}

Outcome desk_transfer(Desk& desk) {
  const auto run = desk.seen_run("run_a", false);
  std::size_t passing = 0;
  std::string detail;
  for (const auto& r : run.seen_metrics) {
    const bool ok = r.success_rate >= 0.70 && r.identity_l1 <= 0.15 && r.n_samples == 200;
    passing += ok;
    detail += r.domain + fmt(" %.3f/%.3f", r.success_rate, r.identity_l1) + (ok ? "" : " (below)") + ", ";
  }
  detail += std::to_string(passing) + " of " + std::to_string(run.seen_metrics.size()) +
            " domains meet success >= 0.70 with identity L1 <= 0.15";
  return {run.seen_metrics.size() == 5 && passing >= 4, detail};
}

Outcome unseen_finetune(Desk& desk) {
  const RunConfig defaults;
  std::map<std::string, int> wins;
  std::string detail;
  bool all_zero = true;
  for (const auto seed : kSeeds) {
    const auto ft = desk.unseen_run(seed, true);
    const auto noft = desk.unseen_run(seed, false);
    if (ft.size() != noft.size()) return {false, "fine-tuned and plain runs cover different domains"};
    detail += "seed " + std::to_string(seed) + ":";
    for (std::size_t i = 0; i < ft.size(); ++i) {
      wins[ft[i].domain] += ft[i].success_rate >= noft[i].success_rate;
      all_zero = all_zero && ft[i].success_rate == 0 && noft[i].success_rate == 0;
      detail += " " + ft[i].domain + fmt(" %.3f vs %.3f", ft[i].success_rate, noft[i].success_rate);
    }
    detail += "; ";
  }
  bool ok = wins.size() == defaults.unseen_domains.size();
  for (const auto& [domain, n] : wins) {
    ok = ok && n >= 2;
    detail += domain + " " + std::to_string(n) + "/3 ";
  }
  if (all_zero) detail += "(every success rate is 0, so the comparison holds trivially)";
  return {ok, detail};
}

Outcome domain_loss_ablation(Desk& desk) {
  const double with_dom = mean_success(desk.seen_run("run_a", false).seen_metrics);
  const double without = mean_success(desk.seen_run("no_dom", true).seen_metrics);
  return {without < with_dom, fmt("mean success %.4f with w_dom = 0 vs %.4f default", without, with_dom)};
}

Outcome determinism(Desk& desk) {
  const auto a = desk.seen_run("run_a", false);
  const auto b = desk.seen_run("run_b", false);
  const auto ta = read_text(a.metrics_csv), tb = read_text(b.metrics_csv);
  const bool same_ck = file_hash(a.train_dir / "checkpoint.bin") == file_hash(b.train_dir / "checkpoint.bin");
  return {!ta.empty() && ta == tb,
          std::string(ta == tb ? "metrics.csv identical" : "metrics.csv differs") +
              (same_ck ? ", checkpoints identical" : ", checkpoints differ")};
}

}  // namespace acceptance
