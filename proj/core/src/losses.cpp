#include "metalgan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace metalgan::losses {
namespace {

template <typename T>
T clamp_prob(T p) {
  return std::clamp(p, static_cast<T>(kProbClamp), static_cast<T>(1.0 - kProbClamp));
}

// -mean log(p) or -mean log(1 - p) on clamped probabilities.
template <typename T>
double mean_neg_log(std::span<const T> probs, bool positive) {
  if (probs.empty()) throw ConfigError("loss over an empty probability grid");
  double acc = 0;
  for (T p : probs) {
    const double q = static_cast<double>(clamp_prob(p));
    acc -= positive ? std::log(q) : std::log1p(-q);
  }
  return acc / static_cast<double>(probs.size());
}

template <typename T>
std::span<const T> span_of(const Tensor<T>& t) {
  return t.values();
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {adv, dom, rec, feat})
    if (!std::isfinite(w) || w < 0) throw ConfigError("loss weights must be finite and non-negative");
}

double total_d(const LossBundle& b) { return b.adv_d + b.dom_d; }

double total_g(const LossBundle& b, const LossWeights& w) {
  return w.adv * b.adv_g + w.dom * b.dom_g + w.rec * b.rec + w.feat * b.feat;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& logits) {
  Tensor<T> out(logits.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-logits[i]));
  return out;
}

template <typename T>
double adversarial_loss_d(std::span<const T> adv_real, std::span<const T> adv_fake) {
  return mean_neg_log(adv_real, true) + mean_neg_log(adv_fake, false);
}

template <typename T>
double domain_loss_d(std::span<const T> dom_task, std::span<const T> dom_global) {
  return 2.0 * mean_neg_log(dom_task, true) + mean_neg_log(dom_global, false);
}

template <typename T>
double adversarial_loss_g(std::span<const T> adv_fake) {
  return mean_neg_log(adv_fake, true);
}

template <typename T>
double domain_loss_g(std::span<const T> dom_fake, std::span<const T> dom_rec) {
  return mean_neg_log(dom_fake, true) + mean_neg_log(dom_rec, true);
}

template <typename T>
double reconstruction_loss(const Tensor<T>& y, const Tensor<T>& g_y) {
  require_same_shape(y, g_y, "reconstruction_loss");
  if (y.empty()) throw ConfigError("reconstruction_loss: empty batch");
  double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(static_cast<double>(y[i]) - g_y[i]);
  return acc / static_cast<double>(y.size());
}

template <typename T>
double feature_matching_loss(const std::vector<Tensor<T>>& feat_fake, const std::vector<Tensor<T>>& feat_real) {
  if (feat_fake.size() != feat_real.size())
    throw ConfigError("feature_matching_loss: " + std::to_string(feat_fake.size()) + " fake layers vs " +
                      std::to_string(feat_real.size()) + " real layers");
  double acc = 0;
  for (std::size_t l = 0; l < feat_fake.size(); ++l) acc += reconstruction_loss(feat_real[l], feat_fake[l]);
  return acc;
}

template <typename T>
double discriminator_accuracy(std::span<const T> adv_real, std::span<const T> adv_fake) {
  const std::size_t total = adv_real.size() + adv_fake.size();
  if (total == 0) return 0.0;
  std::size_t correct = 0;
  for (T p : adv_real) correct += p > T(0.5) ? 1 : 0;
  for (T p : adv_fake) correct += p < T(0.5) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(total);
}

template <typename T>
ag::Var<T> mean_neg_log_prob(const ag::Var<T>& logits, bool positive) {
  Tensor<T> probs = sigmoid(logits.value());
  const double value = mean_neg_log(span_of(probs), positive);
  return ag::make_result<T>(Tensor<T>(Shape{}, static_cast<T>(value)), {logits},
                            [logits, positive, probs = std::move(probs)](ag::Node<T>& self) {
                              const T lo = static_cast<T>(kProbClamp), hi = static_cast<T>(1.0 - kProbClamp);
                              const T g = self.grad[0] / static_cast<T>(probs.size());
                              T* gl = logits.node()->ensure_grad().data();
                              for (std::size_t i = 0; i < probs.size(); ++i) {
                                const T p = probs[i];
                                if (p < lo || p > hi) continue;  // clamp is flat here
                                gl[i] += positive ? -g * (T(1) - p) : g * p;
                              }
                            });
}

template <typename T>
ag::Var<T> adversarial_loss_d(const ag::Var<T>& real_logits, const ag::Var<T>& fake_logits) {
  return ag::sum_scalars<T>({mean_neg_log_prob(real_logits, true), mean_neg_log_prob(fake_logits, false)});
}

template <typename T>
ag::Var<T> domain_loss_d(const ag::Var<T>& task_logits, const ag::Var<T>& global_logits) {
  return ag::sum_scalars<T>(
      {ag::scale(mean_neg_log_prob(task_logits, true), T(2)), mean_neg_log_prob(global_logits, false)});
}

template <typename T>
ag::Var<T> adversarial_loss_g(const ag::Var<T>& fake_logits) {
  return mean_neg_log_prob(fake_logits, true);
}

template <typename T>
ag::Var<T> domain_loss_g(const ag::Var<T>& fake_logits, const ag::Var<T>& rec_logits) {
  return ag::sum_scalars<T>({mean_neg_log_prob(fake_logits, true), mean_neg_log_prob(rec_logits, true)});
}

template <typename T>
ag::Var<T> reconstruction_loss(const ag::Var<T>& y, const ag::Var<T>& g_y) {
  return ag::l1_mean(g_y, y);
}

template <typename T>
ag::Var<T> feature_matching_loss(const std::vector<ag::Var<T>>& feat_fake, const std::vector<ag::Var<T>>& feat_real) {
  if (feat_fake.size() != feat_real.size() || feat_fake.empty())
    throw ConfigError("feature_matching_loss: layer lists differ or are empty");
  std::vector<ag::Var<T>> terms;
  for (std::size_t l = 0; l < feat_fake.size(); ++l) terms.push_back(ag::l1_mean(feat_fake[l], feat_real[l]));
  return ag::sum_scalars(terms);
}

#define METALGAN_LOSSES(T)                                                                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                            \
  template double adversarial_loss_d(std::span<const T>, std::span<const T>);                              \
  template double domain_loss_d(std::span<const T>, std::span<const T>);                                   \
  template double adversarial_loss_g(std::span<const T>);                                                  \
  template double domain_loss_g(std::span<const T>, std::span<const T>);                                   \
  template double reconstruction_loss(const Tensor<T>&, const Tensor<T>&);                                 \
  template double feature_matching_loss(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&);     \
  template double discriminator_accuracy(std::span<const T>, std::span<const T>);                          \
  template ag::Var<T> mean_neg_log_prob(const ag::Var<T>&, bool);                                          \
  template ag::Var<T> adversarial_loss_d(const ag::Var<T>&, const ag::Var<T>&);                            \
  template ag::Var<T> domain_loss_d(const ag::Var<T>&, const ag::Var<T>&);                                 \
  template ag::Var<T> adversarial_loss_g(const ag::Var<T>&);                                               \
  template ag::Var<T> domain_loss_g(const ag::Var<T>&, const ag::Var<T>&);                                 \
  template ag::Var<T> reconstruction_loss(const ag::Var<T>&, const ag::Var<T>&);                           \
  template ag::Var<T> feature_matching_loss(const std::vector<ag::Var<T>>&, const std::vector<ag::Var<T>>&);

METALGAN_LOSSES(float)
METALGAN_LOSSES(double)

}  // namespace metalgan::losses
