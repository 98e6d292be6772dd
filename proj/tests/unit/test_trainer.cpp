#include <algorithm>
#include <limits>
#include <set>

#include "doctest.h"
#include "metalgan/trainer.hpp"
#include "support.hpp"

using namespace metalgan;

namespace {

struct Env {
  LoadedDataset data = support::tiny_dataset(200);
  InnerData inner = make_inner_data(data.index, data.images);
  ModelConfig model = support::tiny_model();
  Generator gen{model.generator};
  Discriminator disc{model.discriminator};

  ParameterSet<float> g0() const {
    Rng rng(1);
    return gen.init_params<float>(rng);
  }
  ParameterSet<float> d0() const {
    Rng rng(2);
    return disc.init_params<float>(rng);
  }
  InnerResult inner_loop(const InnerSettings& s, std::size_t n, const std::string& domain = "blond_hair") const {
    InnerStreams streams{Rng(3), Rng(4)};
    return run_inner_loop(gen, disc, g0(), d0(), support::task_for(data, domain), inner, s, n, streams);
  }
  std::vector<TaskDataset> tasks(const std::vector<std::string>& names) const {
    std::vector<TaskDataset> out;
    for (const auto& n : names) out.push_back(support::task_for(data, n));
    return out;
  }
};

TrainHyperParams tiny_hp(std::size_t epochs, std::size_t meta_iter) {
  TrainHyperParams hp;
  hp.n_epochs = epochs;
  hp.n_meta_iter = meta_iter;
  hp.inner = support::tiny_inner();
  return hp;
}

double median_abs_step(const ParameterSet<double>& before, const ParameterSet<float>& after) {
  std::vector<double> steps;
  for (std::size_t k = 0; k < before.count(); ++k) {
    const auto& a = before.entries()[k].second;
    const auto& b = after.entries()[k].second;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double s = std::abs(double(b[i]) - double(static_cast<float>(a[i])));
      if (s > 0) steps.push_back(s);
    }
  }
  std::nth_element(steps.begin(), steps.begin() + steps.size() / 2, steps.end());
  return steps[steps.size() / 2];
}

}  // namespace

TEST_CASE("inner loop logs every iteration with consistent totals") {
  Env env;
  const auto s = support::tiny_inner();
  const auto r = env.inner_loop(s, 20);
  REQUIRE(r.log.size() == 20);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const auto& e = r.log[i];
    CHECK(e.iteration == i);
    const auto& b = e.losses;
    for (double v : {b.adv_d, b.dom_d, b.adv_g, b.dom_g, b.rec, b.feat, b.total_d, b.total_g}) CHECK(std::isfinite(v));
    CHECK(b.total_d == b.adv_d + b.dom_d);
    CHECK(b.total_g == losses::total_g(b, s.weights));
    CHECK((b.accuracy >= 0 && b.accuracy <= 1));
  }
}

TEST_CASE("gates follow the accuracy thresholds") {
  Env env;
  auto s = support::tiny_inner();
  s.gate_low = 0.3;
  s.gate_high = 0.7;
  const auto r = env.inner_loop(s, 30);
  for (const auto& e : r.log) {
    CHECK(e.d_updated == (e.losses.accuracy < s.gate_high));
    CHECK(e.g_updated == (e.losses.accuracy > s.gate_low || e.iteration == 0));
  }
}

TEST_CASE("T = 0 freezes the discriminator") {
  Env env;
  auto s = support::tiny_inner();
  s.gate_low = 0;
  s.gate_high = 0;
  const auto r = env.inner_loop(s, 10);
  CHECK(r.discriminator == env.d0());
  for (const auto& e : r.log) CHECK_FALSE(e.d_updated);
}

TEST_CASE("t = 1 updates the generator only at the first iteration") {
  Env env;
  auto s = support::tiny_inner();
  s.gate_low = 1;
  s.gate_high = 1;
  const auto r10 = env.inner_loop(s, 10);
  const auto r1 = env.inner_loop(s, 1);
  for (const auto& e : r10.log) CHECK(e.g_updated == (e.iteration == 0));
  CHECK(r10.generator == r1.generator);
  CHECK_FALSE(r1.generator == env.g0());
}

TEST_CASE("inner loop leaves the caller's parameters untouched") {
  Env env;
  const auto g = env.g0();
  const auto d = env.d0();
  const auto g_snapshot = g, d_snapshot = d;
  InnerStreams streams{Rng(3), Rng(4)};
  const auto r = run_inner_loop(env.gen, env.disc, g, d, support::task_for(env.data, "mustache"), env.inner,
                                support::tiny_inner(), 5, streams);
  CHECK(g == g_snapshot);
  CHECK(d == d_snapshot);
  CHECK_FALSE(r.generator == g);
}

TEST_CASE("inner loop is deterministic in its streams") {
  Env env;
  const auto a = env.inner_loop(support::tiny_inner(), 6);
  const auto b = env.inner_loop(support::tiny_inner(), 6);
  CHECK(a.generator == b.generator);
  CHECK(a.discriminator == b.discriminator);
}

TEST_CASE("non-finite losses abort naming the term and iteration") {
  Env env;
  auto images = env.data.images;
  LoadedDataset broken{env.data.index, env.data.table, {}};
  const auto task = support::task_for(env.data, "eyeglasses");
  for (const auto& id : env.data.table.ids()) {
    auto img = env.data.images.get(id);
    if (std::find(task.member_ids.begin(), task.member_ids.end(), id) != task.member_ids.end())
      img.fill(std::numeric_limits<float>::quiet_NaN());
    broken.images.insert(id, img);
  }
  const auto data = make_inner_data(broken.index, broken.images);
  InnerStreams streams{Rng(3), Rng(4)};
  try {
    run_inner_loop(env.gen, env.disc, env.g0(), env.d0(), task, data, support::tiny_inner(), 3, streams);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("non-finite adv_d") != std::string::npos);
    CHECK(msg.find("iteration 0") != std::string::npos);
  }
  try {
    run_training(env.model, {task}, data, tiny_hp(2, 2), 0);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 0") != std::string::npos);
    CHECK(msg.find("eyeglasses") != std::string::npos);
  }
}

TEST_CASE("one epoch of one iteration is exactly one Reptile displacement") {
  Env env;
  auto hp = tiny_hp(1, 1);
  hp.lambda_ml = 0.25;
  int calls = 0;
  TrainOptions opt;
  opt.observer = [&](const EpochView& v) {
    ++calls;
    CHECK(v.epoch == 1);
    for (auto [before, inner, after] : {std::tuple{&v.g_before, &v.g_inner, &v.g_after},
                                        std::tuple{&v.d_before, &v.d_inner, &v.d_after}}) {
      for (std::size_t k = 0; k < before->count(); ++k) {
        const auto& name = before->entries()[k].first;
        const auto& b = before->at(name);
        const auto& i = inner->at(name);
        const auto& a = after->at(name);
        for (std::size_t j = 0; j < b.size(); ++j) CHECK(a[j] == b[j] + 0.25 * (double(i[j]) - b[j]));
      }
    }
  };
  const auto r = run_training(env.model, env.tasks({"blond_hair"}), env.inner, hp, 0, opt);
  CHECK(calls == 1);
  CHECK(r.log.size() == 1);
  CHECK(r.checkpoint.epoch == 1);
}

TEST_CASE("lambda_ml = 0 leaves the weights bit-identical") {
  Env env;
  const auto init = run_training(env.model, env.tasks({"blond_hair"}), env.inner, tiny_hp(0, 2), 5).checkpoint;
  auto hp = tiny_hp(4, 3);
  hp.lambda_ml = 0;
  const auto r = run_training(env.model, env.tasks({"blond_hair", "mustache"}), env.inner, hp, 5).checkpoint;
  CHECK(r.generator_params == init.generator_params);
  CHECK(r.discriminator_params == init.discriminator_params);
  CHECK(checkpoint_payload(r) == checkpoint_payload(init));
  CHECK(r.epoch == 4);
}

TEST_CASE("optimizer moments restart at every clone") {
  Env env;
  auto hp = tiny_hp(4, 1);
  hp.lambda_ml = 0.5;
  std::vector<double> medians;
  TrainOptions opt;
  opt.observer = [&](const EpochView& v) { medians.push_back(median_abs_step(v.g_before, v.g_inner)); };
  run_training(env.model, env.tasks({"blond_hair"}), env.inner, hp, 2, opt);
  REQUIRE(medians.size() == 4);
  // A fresh Adam moves each parameter by about lr on its first step.
  for (double m : medians) CHECK(m == doctest::Approx(hp.inner.lambda_g).epsilon(0.01));
}

TEST_CASE("training is deterministic in the seed") {
  Env env;
  const auto tasks = env.tasks({"blond_hair", "eyeglasses"});
  const auto a = run_training(env.model, tasks, env.inner, tiny_hp(3, 2), 11);
  const auto b = run_training(env.model, tasks, env.inner, tiny_hp(3, 2), 11);
  const auto c = run_training(env.model, tasks, env.inner, tiny_hp(3, 2), 12);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  CHECK(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(format_train_log_row(a.log[i]) == format_train_log_row(b.log[i]));
  CHECK_FALSE(c.checkpoint.generator_params == a.checkpoint.generator_params);
}

TEST_CASE("task draws are uniform over the configured domains") {
  Env env;
  {
    std::set<std::string> seen;
    const auto r = run_training(env.model, env.tasks({"mustache"}), env.inner, tiny_hp(5, 1), 0);
    for (const auto& row : r.log) seen.insert(row.task);
    CHECK(seen == std::set<std::string>{"mustache"});
  }
  std::set<std::string> seen;
  const auto r = run_training(env.model, env.tasks({"mustache", "pale_skin", "black_hair"}), env.inner,
                              tiny_hp(24, 1), 0);
  for (const auto& row : r.log) seen.insert(row.task);
  CHECK(seen.size() == 3);
}

TEST_CASE("training writes the log and periodic checkpoints") {
  Env env;
  support::TempDir dir;
  auto hp = tiny_hp(5, 2);
  hp.checkpoint_interval = 2;
  std::vector<std::uint64_t> epochs;
  TrainOptions opt;
  opt.out_dir = dir.path();
  opt.observer = [&](const EpochView& v) {
    if (v.epoch == 3) epochs.push_back(load_checkpoint(dir / "checkpoint.bin").epoch);
  };
  const auto r = run_training(env.model, env.tasks({"black_hair"}), env.inner, hp, 0, opt);
  CHECK(epochs == std::vector<std::uint64_t>{2});
  CHECK(load_checkpoint(dir / "checkpoint.bin") == r.checkpoint);
  CHECK(r.checkpoint.epoch == 5);
  const auto text = support::read_file(dir / "train_log.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,inner_iter,task,adv_d,dom_d,adv_g,dom_g,rec,feat,total_d,total_g,accuracy,d_updated,g_updated");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 10);
  CHECK(r.log.size() == 10);
}

TEST_CASE("a failed checkpoint write halts with the state reached") {
  Env env;
  support::TempDir dir;
  std::filesystem::create_directories(dir / "checkpoint.bin/blocker");
  auto hp = tiny_hp(4, 2);
  hp.checkpoint_interval = 2;
  TrainOptions opt;
  opt.out_dir = dir.path();
  try {
    run_training(env.model, env.tasks({"black_hair"}), env.inner, hp, 0, opt);
    FAIL("expected TrainingHalted");
  } catch (const TrainingHalted& e) {
    CHECK(e.partial().checkpoint.epoch == 2);
    CHECK(e.partial().log.size() == 4);
  }
}

TEST_CASE("hyper-parameter validation") {
  auto s = support::tiny_inner();
  s.gate_low = 0.8;
  s.gate_high = 0.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = support::tiny_inner();
  s.batch_size = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = support::tiny_inner();
  s.lambda_g = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  auto hp = tiny_hp(1, 0);
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  Env env;
  CHECK_THROWS_AS(run_training(env.model, {}, env.inner, tiny_hp(1, 1), 0), ConfigError);
  TaskDataset empty{DomainSpec::from_name("x"), {}, std::nullopt};
  InnerStreams streams{Rng(0), Rng(0)};
  CHECK_THROWS_AS(run_inner_loop(env.gen, env.disc, env.g0(), env.d0(), empty, env.inner, support::tiny_inner(), 1, streams),
                  DatasetError);
}

TEST_CASE("full-scale presets") {
  const auto hp = TrainHyperParams::full_scale();
  CHECK(hp.n_epochs == 100000);
  CHECK(hp.inner.batch_size == 16);
  CHECK(hp.lambda_ml == 0.01);
  CHECK(hp.n_meta_iter == 20);
  CHECK(hp.inner.weights == losses::LossWeights{1, 1, 10, 1});
  CHECK(TrainHyperParams::desk().n_epochs == 2000);
  CHECK(TrainHyperParams::desk().inner.batch_size == 8);
}
