#include <benchmark/benchmark.h>

#include "metalgan/synthetic.hpp"
#include "metalgan/trainer.hpp"

using namespace metalgan;

namespace {

struct Fixture {
  synthetic::SyntheticDataset data;
  InnerData inner;
  TaskDataset task;
  Generator g{GeneratorConfig::desk()};
  Discriminator d{DiscriminatorConfig::desk()};
  ParameterSet<float> gp, dp;

  Fixture() : data(synthetic::generate_synthetic_dataset({32, 400, 3})) {
    inner = make_inner_data(data.index, data.images);
    Rng rng(1);
    task = restrict_to_domain(data.index, data.table, DomainSpec::from_name("blond_hair"), std::nullopt, rng);
    gp = g.init_params<float>(rng);
    dp = d.init_params<float>(rng);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(0);
  Tensor<float> x({8, c, 32, 32}), w({c, c, 3, 3});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(rng.normal() * 0.05);
  for (auto _ : state) {
    auto xv = ag::parameter(x);
    auto y = ag::conv2d(xv, ag::parameter(w), ag::Var<float>(), 1, 1);
    ag::backward(ag::l1_mean(y, ag::constant(Tensor<float>(y.shape()))));
    benchmark::DoNotOptimize(xv.grad().data());
  }
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_InnerIteration(benchmark::State& state) {
  auto& f = fixture();
  InnerSettings s;
  s.gate_low = 0.0;  // keep both updates on
  s.gate_high = 1.0;
  InnerStreams streams{Rng(1), Rng(2)};
  for (auto _ : state) {
    auto r = run_inner_loop(f.g, f.d, f.gp, f.dp, f.task, f.inner, s, 1, streams);
    benchmark::DoNotOptimize(r.log.data());
  }
}
BENCHMARK(BM_InnerIteration)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
