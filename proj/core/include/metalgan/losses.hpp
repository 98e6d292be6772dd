#pragma once

// Discriminator and generator objectives. Probabilities are sigmoid(logit)
// clamped to [kProbClamp, 1 - kProbClamp]; "classified as P" means binary
// cross-entropy toward label 1 for P. The span/tensor overloads evaluate the
// scalar objectives directly on probabilities; the ag:: overloads build the
// same quantities on logits inside a graph.

#include <span>
#include <vector>

#include "metalgan/autograd.hpp"

namespace metalgan::losses {

inline constexpr double kProbClamp = 1e-7;

struct LossWeights {
  double adv = 1.0;
  double dom = 1.0;
  double rec = 10.0;
  double feat = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct LossBundle {
  double adv_d = 0, dom_d = 0;
  double adv_g = 0, dom_g = 0, rec = 0, feat = 0;
  double total_d = 0, total_g = 0;
  double accuracy = 0;
};

double total_d(const LossBundle& b);
double total_g(const LossBundle& b, const LossWeights& w);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& logits);

/// -[mean log p_real + mean log(1 - p_fake)]
template <typename T>
double adversarial_loss_d(std::span<const T> adv_real, std::span<const T> adv_fake);

/// -[2 mean log p_task + mean log(1 - p_global)]
template <typename T>
double domain_loss_d(std::span<const T> dom_task, std::span<const T> dom_global);

/// Non-saturating: -mean log p_fake
template <typename T>
double adversarial_loss_g(std::span<const T> adv_fake);

/// -[mean log p_fake + mean log p_rec]
template <typename T>
double domain_loss_g(std::span<const T> dom_fake, std::span<const T> dom_rec);

template <typename T>
double reconstruction_loss(const Tensor<T>& y, const Tensor<T>& g_y);

/// Sum over tapped layers of the mean absolute difference.
template <typename T>
double feature_matching_loss(const std::vector<Tensor<T>>& feat_fake, const std::vector<Tensor<T>>& feat_real);

/// Pooled fraction of correct adversarial-head patch decisions at 0.5; real is
/// correct when p > 0.5, fake when p < 0.5, ties are wrong.
template <typename T>
double discriminator_accuracy(std::span<const T> adv_real, std::span<const T> adv_fake);

// Graph versions over logits. `positive` selects the target label.
template <typename T>
ag::Var<T> mean_neg_log_prob(const ag::Var<T>& logits, bool positive);

template <typename T>
ag::Var<T> adversarial_loss_d(const ag::Var<T>& real_logits, const ag::Var<T>& fake_logits);

template <typename T>
ag::Var<T> domain_loss_d(const ag::Var<T>& task_logits, const ag::Var<T>& global_logits);

template <typename T>
ag::Var<T> adversarial_loss_g(const ag::Var<T>& fake_logits);

template <typename T>
ag::Var<T> domain_loss_g(const ag::Var<T>& fake_logits, const ag::Var<T>& rec_logits);

template <typename T>
ag::Var<T> reconstruction_loss(const ag::Var<T>& y, const ag::Var<T>& g_y);

template <typename T>
ag::Var<T> feature_matching_loss(const std::vector<ag::Var<T>>& feat_fake, const std::vector<ag::Var<T>>& feat_real);

}  // namespace metalgan::losses
