#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "metalgan/losses.hpp"

using namespace metalgan;
using namespace metalgan::losses;

namespace {

std::vector<double> filled(std::size_t n, double v) { return std::vector<double>(n, v); }

double logit(double p) { return std::log(p / (1 - p)); }

ag::Var<double> logits_of(const std::vector<double>& probs) {
  Tensor<double> t({static_cast<int>(probs.size()), 1, 1, 1});
  for (std::size_t i = 0; i < probs.size(); ++i) t[i] = logit(probs[i]);
  return ag::constant(t);
}

}  // namespace

TEST_CASE("adversarial discriminator loss") {
  CHECK(adversarial_loss_d<double>(filled(4, 0.5), filled(4, 0.5)) == doctest::Approx(2 * std::log(2.0)));
  CHECK(adversarial_loss_d<double>(filled(4, 0.9), filled(4, 0.1)) == doctest::Approx(-2 * std::log(0.9)));
  CHECK(adversarial_loss_d<double>(filled(4, 1.0), filled(4, 0.0)) == doctest::Approx(0).epsilon(1e-6));
}

TEST_CASE("domain discriminator loss weights the task term twice") {
  CHECK(domain_loss_d<double>(filled(3, 0.5), filled(3, 0.5)) == doctest::Approx(3 * std::log(2.0)));
  CHECK(domain_loss_d<double>(filled(3, 1.0), filled(3, 0.0)) == doctest::Approx(0).epsilon(1e-6));
  // d/dz of -2 log sigmoid(z) is twice that of -log sigmoid(z).
  for (double p : {0.2, 0.5, 0.7}) {
    const auto z = ag::parameter(Tensor<double>({1, 1, 1, 1}, logit(p)));
    ag::backward(domain_loss_d(z, logits_of({0.3})));
    const auto z2 = ag::parameter(Tensor<double>({1, 1, 1, 1}, logit(p)));
    ag::backward(mean_neg_log_prob(z2, true));
    CHECK(z.grad()[0] == doctest::Approx(2 * z2.grad()[0]));
    CHECK(z2.grad()[0] == doctest::Approx(p - 1));
  }
}

TEST_CASE("generator adversarial loss is non-saturating") {
  CHECK(adversarial_loss_g<double>(filled(2, 0.5)) == doctest::Approx(std::log(2.0)));
  CHECK(adversarial_loss_g<double>(filled(2, 0.1)) == doctest::Approx(-std::log(0.1)));
  CHECK(adversarial_loss_g<double>(filled(2, 1.0)) == doctest::Approx(0).epsilon(1e-6));
}

TEST_CASE("generator domain loss") {
  CHECK(domain_loss_g<double>(filled(2, 0.5), filled(2, 0.5)) == doctest::Approx(2 * std::log(2.0)));
  CHECK(domain_loss_g<double>(filled(2, 0.9), filled(2, 0.1)) == doctest::Approx(-std::log(0.9) - std::log(0.1)));
  CHECK(domain_loss_g<double>(filled(2, 1.0), filled(2, 1.0)) == doctest::Approx(0).epsilon(1e-6));
}

TEST_CASE("probabilities are clamped") {
  const double big = -std::log(kProbClamp);
  CHECK(adversarial_loss_g<double>(filled(2, 0.0)) == doctest::Approx(big));
  CHECK(adversarial_loss_d<double>(filled(2, 0.0), filled(2, 1.0)) == doctest::Approx(2 * big));
  Tensor<double> extreme({1, 1, 1, 2}, std::vector<double>{-800.0, 800.0});
  const auto v = mean_neg_log_prob(ag::constant(extreme), true).item();
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(big / 2).epsilon(1e-6));
}

TEST_CASE("graph and scalar forms agree") {
  const std::vector<double> real{0.8, 0.6, 0.3, 0.55}, fake{0.2, 0.4, 0.9, 0.35};
  CHECK(adversarial_loss_d(logits_of(real), logits_of(fake)).item() ==
        doctest::Approx(adversarial_loss_d<double>(real, fake)));
  CHECK(domain_loss_d(logits_of(real), logits_of(fake)).item() == doctest::Approx(domain_loss_d<double>(real, fake)));
  CHECK(adversarial_loss_g(logits_of(fake)).item() == doctest::Approx(adversarial_loss_g<double>(fake)));
  CHECK(domain_loss_g(logits_of(real), logits_of(fake)).item() == doctest::Approx(domain_loss_g<double>(real, fake)));
}

TEST_CASE("reconstruction loss") {
  Tensor<double> zero({2, 3, 2, 2}, 0.0), half({2, 3, 2, 2}, 0.5);
  CHECK(reconstruction_loss(zero, zero) == 0.0);
  CHECK(reconstruction_loss(zero, half) == doctest::Approx(0.5));
  Tensor<double> a({1, 1, 1, 3}, std::vector<double>{0.1, -0.4, 0.9}), b({1, 1, 1, 3}, std::vector<double>{0.3, 0.2, -0.1});
  CHECK(reconstruction_loss(a, b) == reconstruction_loss(b, a));
  CHECK(reconstruction_loss(a, b) == doctest::Approx((0.2 + 0.6 + 1.0) / 3));
  CHECK(reconstruction_loss(ag::constant(a), ag::constant(b)).item() == doctest::Approx((0.2 + 0.6 + 1.0) / 3));
  CHECK_THROWS_AS(reconstruction_loss(a, zero), ConfigError);
}

TEST_CASE("feature matching sums per-layer mean gaps") {
  Tensor<double> f0({1, 2, 2, 2}, 0.0), f0g({1, 2, 2, 2}, 0.25);
  CHECK(feature_matching_loss<double>({f0}, {f0}) == 0.0);
  CHECK(feature_matching_loss<double>({f0}, {f0g}) == doctest::Approx(0.25));
  Tensor<double> a({1, 1, 2, 2}, 0.0), b({1, 1, 2, 2}, 0.1), c({1, 4, 1, 1}, 1.0), d({1, 4, 1, 1}, 1.2);
  CHECK(feature_matching_loss<double>({a, c}, {b, d}) == doctest::Approx(0.3));
  CHECK(feature_matching_loss(std::vector{ag::constant(a), ag::constant(c)}, std::vector{ag::constant(b), ag::constant(d)})
            .item() == doctest::Approx(0.3));
  CHECK_THROWS_AS(feature_matching_loss<double>({a}, {a, c}), ConfigError);
  CHECK_THROWS_AS(feature_matching_loss<double>({a}, {c}), ConfigError);
}

TEST_CASE("discriminator accuracy counts patch decisions") {
  CHECK(discriminator_accuracy<double>(filled(4, 0.9), filled(4, 0.1)) == 1.0);
  CHECK(discriminator_accuracy<double>(filled(4, 0.5), filled(4, 0.5)) == 0.0);
  CHECK(discriminator_accuracy<double>(std::vector<double>{0.9, 0.2, 0.8, 0.4}, filled(4, 0.3)) == 0.75);
  CHECK(discriminator_accuracy<double>(filled(2, 0.1), filled(6, 0.9)) == 0.0);
}

TEST_CASE("loss totals recompute from components") {
  LossBundle b;
  b.adv_d = 0.3;
  b.dom_d = 1.1;
  b.adv_g = 0.7;
  b.dom_g = 1.9;
  b.rec = 0.05;
  b.feat = 0.4;
  const LossWeights w{1.0, 2.0, 10.0, 0.5};
  CHECK(total_d(b) == 0.3 + 1.1);
  CHECK(total_g(b, w) == doctest::Approx(0.7 + 2.0 * 1.9 + 10.0 * 0.05 + 0.5 * 0.4));
  LossWeights w3 = w;
  w3.rec *= 3;
  CHECK(total_g(b, w3) - total_g(b, w) == doctest::Approx(2 * w.rec * b.rec));
  CHECK_THROWS_AS((LossWeights{1, -1, 1, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((LossWeights{1, 1, NAN, 1}.validate()), ConfigError);
}

TEST_CASE("losses are non-negative") {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = rng.uniform01();
    for (auto& v : b) v = rng.uniform01();
    CHECK(adversarial_loss_d<double>(a, b) >= 0);
    CHECK(domain_loss_d<double>(a, b) >= 0);
    CHECK(adversarial_loss_g<double>(a) >= 0);
    CHECK(domain_loss_g<double>(a, b) >= 0);
  }
}

TEST_CASE("loss gradients through both networks match finite differences") {
  for (const auto& c : gradcheck::check_losses()) {
    INFO(c.name, ": ", c.result.worst);
    CHECK(c.result.checked <= 500);
    CHECK(c.result.max_rel_error <= 1e-3);
    CHECK(c.result.above_floor > 0);
  }
}
