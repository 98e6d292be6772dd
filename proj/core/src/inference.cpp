#include "metalgan/inference.hpp"

#include <algorithm>
#include <cstring>

namespace metalgan {
namespace {

enum Stream : std::uint64_t { kFineTuneY = 20, kFineTuneX = 21, kSpecialize = 30 };

std::uint64_t name_stream(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

constexpr int kGenerateChunk = 50;

}  // namespace

InferHyperParams InferHyperParams::full_scale() {
  InferHyperParams hp;
  hp.inner.batch_size = 16;
  return hp;
}

void InferHyperParams::validate() const {
  inner.validate();
  if (!(lambda_ml >= 0) || !std::isfinite(lambda_ml)) throw ConfigError("inference lambda_ml must be finite and >= 0");
  if (few_shot == 0) throw ConfigError("few-shot size must be >= 1");
}

std::vector<std::string> overlap_warnings(const std::vector<std::string>& train_domains,
                                          const std::vector<std::string>& unseen_domains) {
  std::vector<std::string> out;
  for (const auto& u : unseen_domains)
    if (std::find(train_domains.begin(), train_domains.end(), u) != train_domains.end())
      out.push_back("unseen domain '" + u + "' is also a training domain");
  return out;
}

Checkpoint fine_tune_unseen(const Checkpoint& checkpoint, const std::vector<TaskDataset>& tasks,
                            const InnerData& data, const InferHyperParams& hp, std::uint64_t seed,
                            const std::function<void(const EpochView&)>& observer) {
  hp.validate();
  const Generator generator(checkpoint.generator);
  const Discriminator discriminator(checkpoint.discriminator);
  auto theta_g = checkpoint.generator_params.cast<double>();
  auto theta_d = checkpoint.discriminator_params.cast<double>();
  InnerStreams streams{Rng(derive_seed(seed, kFineTuneY)), Rng(derive_seed(seed, kFineTuneX))};

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < hp.n_inf_epochs; ++epoch) {
    for (const auto& task : tasks) {
      auto inner = run_inner_loop(generator, discriminator, theta_g.cast<float>(), theta_d.cast<float>(), task, data,
                                  hp.inner, hp.n_inf_train, streams);
      auto new_g = reptile_update(theta_g, inner.generator.cast<double>(), hp.lambda_ml);
      auto new_d = reptile_update(theta_d, inner.discriminator.cast<double>(), hp.lambda_ml);
      if (observer)
        observer(EpochView{++step, task.domain.name, theta_g, theta_d, inner.generator, inner.discriminator, new_g,
                           new_d});
      theta_g = std::move(new_g);
      theta_d = std::move(new_d);
    }
  }
  if (tasks.empty() || hp.n_inf_epochs == 0) return checkpoint;
  Checkpoint out = checkpoint;
  out.generator_params = theta_g.cast<float>();
  out.discriminator_params = theta_d.cast<float>();
  return out;
}

ImageBatch generate(const Checkpoint& checkpoint, const ImageBatch& inputs) {
  const Generator generator(checkpoint.generator);
  generator.check_input(inputs.shape());
  const int n = inputs.dim(0);
  ImageBatch out(inputs.shape());
  const std::size_t per = inputs.size() / static_cast<std::size_t>(n);
  for (int start = 0; start < n; start += kGenerateChunk) {
    const int count = std::min(kGenerateChunk, n - start);
    Shape s = inputs.shape();
    s[0] = count;
    Tensor<float> chunk(s);
    std::memcpy(chunk.data(), inputs.data() + start * per, chunk.size() * sizeof(float));
    const auto y = generator.forward(checkpoint.generator_params, chunk);
    std::memcpy(out.data() + start * per, y.data(), y.size() * sizeof(float));
  }
  return out;
}

ImageBatch specialize_and_generate(const Checkpoint& checkpoint, const TaskDataset& domain, const ImageBatch& inputs,
                                   const InnerData& data, const InferHyperParams& hp, std::uint64_t seed) {
  hp.validate();
  const Generator generator(checkpoint.generator);
  const Discriminator discriminator(checkpoint.discriminator);
  const std::uint64_t stream = derive_seed(seed, kSpecialize) ^ name_stream(domain.domain.name);
  InnerStreams streams{Rng(derive_seed(stream, 1)), Rng(derive_seed(stream, 2))};
  Checkpoint clone = checkpoint;
  if (hp.n_inf_test > 0) {
    auto inner = run_inner_loop(generator, discriminator, checkpoint.generator_params,
                                checkpoint.discriminator_params, domain, data, hp.inner, hp.n_inf_test, streams);
    clone.generator_params = std::move(inner.generator);
  }
  return generate(clone, inputs);
}

}  // namespace metalgan
