#include "metalgan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "metalgan/optim.hpp"

namespace metalgan {
namespace {

// Independent random streams derived from the run seed.
enum Stream : std::uint64_t { kInitG = 10, kInitD = 11, kTaskDraw = 12, kSampleY = 13, kSampleX = 14 };

void require_finite(double v, const char* term, std::size_t iteration) {
  if (!std::isfinite(v))
    throw TrainingError(std::string("non-finite ") + term + " at inner iteration " + std::to_string(iteration));
}

ag::Var<float> weighted(const ag::Var<float>& v, double w) { return ag::scale(v, static_cast<float>(w)); }

std::string streams_state(const Rng& task, const InnerStreams& s) {
  nlohmann::json j = {{"task", task.state()}, {"y", s.y.state()}, {"x", s.x.state()}};
  return j.dump();
}

}  // namespace

void InnerSettings::validate() const {
  if (!(lambda_g > 0) || !(lambda_d > 0)) throw ConfigError("learning rates must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam betas must be in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(gate_low >= 0 && gate_low <= gate_high && gate_high <= 1))
    throw ConfigError("gates must satisfy 0 <= t <= T <= 1");
  weights.validate();
}

TrainHyperParams TrainHyperParams::full_scale() {
  TrainHyperParams hp;
  hp.n_epochs = 100000;
  hp.inner.batch_size = 16;
  return hp;
}

void TrainHyperParams::validate() const {
  inner.validate();
  if (!(lambda_ml >= 0) || !std::isfinite(lambda_ml)) throw ConfigError("lambda_ml must be finite and >= 0");
  if (n_meta_iter == 0) throw ConfigError("N_meta_iter must be >= 1");
  if (checkpoint_interval == 0) throw ConfigError("checkpoint interval must be >= 1");
}

InnerData make_inner_data(const DatasetIndex& index, const ImageStore& images) {
  InnerData data{&images, index.ids(Split::kTrain)};
  if (data.global_pool.empty()) throw DatasetError("dataset has no training images");
  return data;
}

InnerResult run_inner_loop(const Generator& generator, const Discriminator& discriminator,
                           ParameterSet<float> g_params, ParameterSet<float> d_params, const TaskDataset& task,
                           const InnerData& data, const InnerSettings& settings, std::size_t n_iter,
                           InnerStreams& streams) {
  if (task.member_ids.empty()) throw DatasetError("task '" + task.domain.name + "' is empty");
  if (data.global_pool.empty() || data.images == nullptr) throw DatasetError("global image pool is empty");

  Adam<float> adam_g(g_params, settings.lambda_g, settings.beta1, settings.beta2);
  Adam<float> adam_d(d_params, settings.lambda_d, settings.beta1, settings.beta2);
  const auto& w = settings.weights;

  InnerResult result;
  result.log.reserve(n_iter);
  for (std::size_t i = 0; i < n_iter; ++i) {
    const auto yb = sample_batch(task, *data.images, settings.batch_size, streams.y);
    const auto xb = sample_batch(data.global_pool, *data.images, settings.batch_size, streams.x);
    generator.check_input(yb.images.shape());
    const auto y = ag::constant(yb.images);
    const auto x = ag::constant(xb.images);

    InnerLogEntry entry;
    entry.iteration = i;
    auto& b = entry.losses;

    BoundParams<float> gp(g_params, true);
    const auto g_x = generator.forward(gp, x);

    {  // discriminator step; G(x) is reused below since G has not moved yet
      BoundParams<float> dp(d_params, true);
      const auto real = discriminator.forward(dp, y);
      const auto fake = discriminator.forward(dp, ag::detach(g_x));
      const auto global = discriminator.forward(dp, x);
      const auto adv_d = losses::adversarial_loss_d(real.adv, fake.adv);
      const auto dom_d = losses::domain_loss_d(real.dom, global.dom);
      b.adv_d = adv_d.item();
      b.dom_d = dom_d.item();
      b.total_d = b.adv_d + b.dom_d;
      require_finite(b.adv_d, "adv_d", i);
      require_finite(b.dom_d, "dom_d", i);
      const auto p_real = losses::sigmoid(real.adv.value());
      const auto p_fake = losses::sigmoid(fake.adv.value());
      b.accuracy = losses::discriminator_accuracy(p_real.values(), p_fake.values());
      if (b.accuracy < settings.gate_high) {
        ag::backward(ag::sum_scalars<float>({adv_d, dom_d}));
        adam_d.step(d_params, dp.gradients());
        entry.d_updated = true;
      }
    }

    {  // generator step against the (possibly updated) discriminator
      BoundParams<float> dp(d_params, false);
      const auto g_y = generator.forward(gp, y);
      const auto fake = discriminator.forward(dp, g_x);
      const auto rec = discriminator.forward(dp, g_y);
      const auto real = discriminator.forward(dp, y);
      const auto adv_g = losses::adversarial_loss_g(fake.adv);
      const auto dom_g = losses::domain_loss_g(fake.dom, rec.dom);
      const auto rec_l = losses::reconstruction_loss(y, g_y);
      const auto feat = losses::feature_matching_loss(fake.features, real.features);
      b.adv_g = adv_g.item();
      b.dom_g = dom_g.item();
      b.rec = rec_l.item();
      b.feat = feat.item();
      b.total_g = losses::total_g(b, w);
      require_finite(b.adv_g, "adv_g", i);
      require_finite(b.dom_g, "dom_g", i);
      require_finite(b.rec, "rec", i);
      require_finite(b.feat, "feat", i);
      if (b.accuracy > settings.gate_low || i == 0) {
        const auto total = ag::sum_scalars<float>(
            {weighted(adv_g, w.adv), weighted(dom_g, w.dom), weighted(rec_l, w.rec), weighted(feat, w.feat)});
        ag::backward(total);
        adam_g.step(g_params, gp.gradients());
        entry.g_updated = true;
      }
    }
    result.log.push_back(entry);
  }
  result.generator = std::move(g_params);
  result.discriminator = std::move(d_params);
  return result;
}

std::string train_log_header() {
  return "epoch,inner_iter,task,adv_d,dom_d,adv_g,dom_g,rec,feat,total_d,total_g,accuracy,d_updated,g_updated";
}

std::string format_train_log_row(const TrainLogRow& row) {
  const auto& e = row.entry;
  const auto& b = e.losses;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu,%zu,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%d",
                static_cast<unsigned long long>(row.epoch), e.iteration, row.task.c_str(), b.adv_d, b.dom_d, b.adv_g,
                b.dom_g, b.rec, b.feat, b.total_d, b.total_g, b.accuracy, e.d_updated ? 1 : 0, e.g_updated ? 1 : 0);
  return buf;
}

Checkpoint make_checkpoint(const ModelConfig& model, const ParameterSet<double>& g, const ParameterSet<double>& d,
                           std::uint64_t epoch, const std::string& rng_state) {
  Checkpoint ck;
  ck.generator = model.generator;
  ck.discriminator = model.discriminator;
  ck.generator_params = g.cast<float>();
  ck.discriminator_params = d.cast<float>();
  ck.epoch = epoch;
  ck.rng_state = rng_state;
  return ck;
}

TrainResult run_training(const ModelConfig& model, const std::vector<TaskDataset>& tasks, const InnerData& data,
                         const TrainHyperParams& hp, std::uint64_t seed, const TrainOptions& options) {
  hp.validate();
  model.generator.validate();
  model.discriminator.validate();
  if (tasks.empty()) throw ConfigError("at least one training domain is required");

  const Generator generator(model.generator);
  const Discriminator discriminator(model.discriminator);
  Rng init_g(derive_seed(seed, kInitG)), init_d(derive_seed(seed, kInitD));
  ParameterSet<double> theta_g = generator.init_params<float>(init_g).cast<double>();
  ParameterSet<double> theta_d = discriminator.init_params<float>(init_d).cast<double>();

  Rng task_rng(derive_seed(seed, kTaskDraw));
  InnerStreams streams{Rng(derive_seed(seed, kSampleY)), Rng(derive_seed(seed, kSampleX))};

  TrainResult result;
  std::ofstream log_file;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    const auto path = *options.out_dir / "train_log.csv";
    log_file.open(path, std::ios::trunc);
    if (!log_file) throw IoError("cannot write '" + path.string() + "'");
    log_file << train_log_header() << '\n';
  }

  auto checkpoint_now = [&](std::uint64_t epoch) {
    result.checkpoint = make_checkpoint(model, theta_g, theta_d, epoch, streams_state(task_rng, streams));
    if (!options.out_dir) return;
    try {
      save_checkpoint(result.checkpoint, *options.out_dir / "checkpoint.bin");
    } catch (const IoError& e) {
      throw TrainingHalted(std::string("training halted at epoch ") + std::to_string(epoch) + ": " + e.what(),
                           std::move(result));
    }
  };

  for (std::size_t epoch = 0; epoch < hp.n_epochs; ++epoch) {
    const TaskDataset& task = tasks[task_rng.uniform_index(tasks.size())];
    InnerResult inner;
    try {
      inner = run_inner_loop(generator, discriminator, theta_g.cast<float>(), theta_d.cast<float>(), task, data,
                             hp.inner, hp.n_meta_iter, streams);
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", task " +
                          task.domain.name + ")");
    }

    const auto inner_g = inner.generator.cast<double>();
    const auto inner_d = inner.discriminator.cast<double>();
    auto new_g = reptile_update(theta_g, inner_g, hp.lambda_ml);
    auto new_d = reptile_update(theta_d, inner_d, hp.lambda_ml);
    if (options.observer)
      options.observer(EpochView{epoch + 1, task.domain.name, theta_g, theta_d, inner.generator, inner.discriminator,
                                 new_g, new_d});
    theta_g = std::move(new_g);
    theta_d = std::move(new_d);

    for (const auto& e : inner.log) {
      TrainLogRow row{epoch, task.domain.name, e};
      if (log_file.is_open()) log_file << format_train_log_row(row) << '\n';
      if (options.keep_log_in_memory) result.log.push_back(std::move(row));
    }
    if (log_file.is_open()) log_file.flush();
    if ((epoch + 1) % hp.checkpoint_interval == 0 && epoch + 1 < hp.n_epochs) checkpoint_now(epoch + 1);
  }
  checkpoint_now(hp.n_epochs);
  return result;
}

}  // namespace metalgan
