#pragma once

#include <cmath>

#include "metalgan/parameters.hpp"

namespace metalgan {

/// Adam with bias correction. Moments start at zero and belong to one inner
/// loop; a new clone gets a new optimizer.
template <typename T>
class Adam {
 public:
  Adam(const ParameterSet<T>& layout, double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(layout.zeros_like()), v_(layout.zeros_like()) {}

  void step(ParameterSet<T>& params, const ParameterSet<T>& grads) {
    if (!params.compatible_with(grads) || !params.compatible_with(m_))
      throw ConfigError("Adam::step: parameter/gradient layout mismatch");
    ++t_;
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T c1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const T c2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
    const T lr = static_cast<T>(lr_), eps = static_cast<T>(eps_);
    auto& pe = params.entries();
    for (std::size_t k = 0; k < pe.size(); ++k) {
      Tensor<T>& p = pe[k].second;
      const Tensor<T>& g = grads.entries()[k].second;
      Tensor<T>& m = m_.entries()[k].second;
      Tensor<T>& v = v_.entries()[k].second;
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    }
  }

  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  ParameterSet<T> m_, v_;
  long t_ = 0;
};

}  // namespace metalgan
