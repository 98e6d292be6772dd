#include <chrono>
#include <cmath>
#include <cstdio>

#include "acceptance.hpp"
#include "gradcheck.hpp"
#include "metalgan/checkpoint.hpp"
#include "metalgan/trainer.hpp"

namespace acceptance {
namespace {

using namespace metalgan;

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Largest per-array relative error of after - before against
// lambda * (inner - before), measured in the 2-norm of the expected step.
double worst_outer_error(const ParameterSet<double>& before, const ParameterSet<float>& inner,
                         const ParameterSet<double>& after, double lambda) {
  double worst = 0;
  for (std::size_t k = 0; k < before.entries().size(); ++k) {
    const auto& b = before.entries()[k].second;
    const auto& i = inner.entries()[k].second;
    const auto& a = after.entries()[k].second;
    double num = 0, den = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double expected = lambda * (static_cast<double>(i[j]) - b[j]);
      const double diff = (a[j] - b[j]) - expected;
      num += diff * diff;
      den += expected * expected;
    }
    if (den == 0) {
      if (num != 0) return INFINITY;
      continue;
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

}  // namespace

Outcome reptile_identity(Desk& desk) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig defaults;
  const auto& data = desk.data();
  const auto tasks = make_tasks(data, defaults.train_domains, std::nullopt, 0);
  const auto inner = make_inner_data(data.index, data.images);

  TrainHyperParams hp = defaults.train;
  hp.n_epochs = 10;
  double worst = 0;
  std::size_t epochs_seen = 0;
  TrainOptions options;
  options.keep_log_in_memory = false;
  options.observer = [&](const EpochView& v) {
    ++epochs_seen;
    worst = std::max(worst, worst_outer_error(v.g_before, v.g_inner, v.g_after, hp.lambda_ml));
    worst = std::max(worst, worst_outer_error(v.d_before, v.d_inner, v.d_after, hp.lambda_ml));
  };
  run_training(defaults.model, tasks, inner, hp, 0, options);

  TrainHyperParams frozen = hp;
  frozen.lambda_ml = 0;
  TrainHyperParams none = hp;
  none.n_epochs = 0;
  const auto after = run_training(defaults.model, tasks, inner, frozen, 0, {}).checkpoint;
  const auto init = run_training(defaults.model, tasks, inner, none, 0, {}).checkpoint;
  const bool identical = checkpoint_payload(after) == checkpoint_payload(init);

  const double s = seconds_since(start);
  return {epochs_seen == 10 && worst <= 1e-6 && identical && s < 60,
          fmt("max per-array relative error %.3g over 10 epochs", worst) +
              (identical ? ", lambda_ml = 0 payload identical" : ", lambda_ml = 0 payload differs") +
              fmt(", %.1f s including data load", s)};
}

Outcome gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  const Generator gen(gradcheck::tiny_generator());
  const Discriminator disc(gradcheck::tiny_discriminator());
  Rng rng(0);
  const std::size_t n_params = gen.init_params<double>(rng).scalar_count() + disc.init_params<double>(rng).scalar_count();
  double worst = 0;
  std::string worst_case;
  for (const auto& c : gradcheck::check_losses(1)) {
    if (c.result.max_rel_error >= worst) {
      worst = c.result.max_rel_error;
      worst_case = c.name + " " + c.result.worst;
    }
  }
  const double s = seconds_since(start);
  return {n_params <= 500 && worst <= 1e-3 && s < 120,
          fmt("%.0f parameters, max relative error %.3g", static_cast<double>(n_params), worst) + " at " + worst_case};
}

Outcome metric_unit_cases() {
  const auto start = std::chrono::steady_clock::now();
  using eval::EmbeddingSet;
  auto set = [](std::size_t d, std::vector<double> v) {
    EmbeddingSet e;
    e.d = d;
    e.n = v.size() / d;
    e.values = std::move(v);
    e.embedder = "unit";
    return e;
  };
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  Rng rng(11);
  std::vector<double> cloud(400 * 8);
  for (auto& v : cloud) v = rng.normal();
  const auto a = set(8, cloud);
  expect(eval::fid(a, a) <= 1e-6, "fid(a, a)");
  // Means 0 and 1 with equal spread; equal means with std 1 and 2.
  expect(std::abs(eval::fid(set(1, {-1, 0, 1}), set(1, {0, 1, 2})) - 1.0) <= 1e-6, "fid mean shift");
  expect(std::abs(eval::fid(set(1, {-1, 0, 1}), set(1, {-2, 0, 2})) - 1.0) <= 1e-6, "fid std ratio");

  const auto grid = eval::prd_lambda_grid(1001);
  const auto same = eval::prd_from_histograms({0.25, 0.25, 0.5}, {0.25, 0.25, 0.5}, grid);
  expect(same.precision[500] == 1.0 && same.recall[500] == 1.0, "PRD identical histograms");
  const auto disjoint = eval::prd_from_histograms({0.5, 0.5, 0, 0}, {0, 0, 0.5, 0.5}, grid);
  bool zeros = true;
  for (std::size_t i = 0; i < grid.size(); ++i) zeros = zeros && disjoint.precision[i] == 0 && disjoint.recall[i] == 0;
  expect(zeros, "PRD disjoint support");
  const auto half = eval::prd_from_histograms({0.5, 0.5}, {1.0, 0.0}, {1.0});
  expect(half.precision[0] == 0.5 && half.recall[0] == 0.5, "PRD half case");

  std::string detail = failures.empty() ? "all cases hold" : "failed:";
  for (const auto& f : failures) detail += " " + f + ";";
  return {failures.empty() && seconds_since(start) < 30, detail};
}

}  // namespace acceptance
