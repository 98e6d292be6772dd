#pragma once

// Label-free generator (encoder / residual bottleneck / decoder with mirrored
// concatenative skips) and a two-headed patch discriminator. Both are
// stateless descriptions: all weights live in a ParameterSet passed to
// forward(). Neither network takes any conditioning input besides the image.

#include <string>
#include <vector>

#include "metalgan/autograd.hpp"
#include "metalgan/parameters.hpp"
#include "metalgan/rng.hpp"

namespace metalgan {

struct GeneratorConfig {
  int base_channels = 64;
  int n_downsample = 2;
  int n_residual = 6;
  bool skip_connections = true;
  int channels = 3;

  /// Reduced width/depth used by the bundled desk-scale runs.
  static GeneratorConfig desk() { return {16, 2, 2, true, 3}; }

  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

struct DiscriminatorConfig {
  int base_channels = 64;
  int n_layers = 4;
  int channels = 3;

  static DiscriminatorConfig desk() { return {16, 4, 3}; }

  void validate() const;
  bool operator==(const DiscriminatorConfig&) const = default;
};

/// Parameter tensors wrapped as graph leaves for one forward pass.
template <typename T>
class BoundParams {
 public:
  BoundParams(const ParameterSet<T>& params, bool requires_grad);

  const ag::Var<T>& operator[](const std::string& name) const { return vars_[source_->position(name)]; }

  /// Accumulated gradients after ag::backward, laid out like the source set.
  /// Arrays that received no gradient are zero.
  ParameterSet<T> gradients() const;

 private:
  const ParameterSet<T>* source_;
  std::vector<ag::Var<T>> vars_;
};

class Generator {
 public:
  explicit Generator(GeneratorConfig config);

  const GeneratorConfig& config() const { return config_; }

  template <typename T>
  ParameterSet<T> init_params(Rng& rng) const;

  /// Throws ConfigError unless shape is (n, channels, s, s) with s divisible
  /// by 2^n_downsample.
  void check_input(const Shape& shape) const;

  template <typename T>
  ag::Var<T> forward(const BoundParams<T>& params, const ag::Var<T>& images) const;

  /// Inference-only convenience: no graph is retained.
  template <typename T>
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& images) const;

 private:
  GeneratorConfig config_;
};

template <typename T>
struct DiscriminatorOutput {
  ag::Var<T> adv;                     // (n, 1, gh, gw) logits
  ag::Var<T> dom;                     // (n, 1, gh, gw) logits
  std::vector<ag::Var<T>> features;   // trunk block activations, shallow to deep
};

class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig config);

  const DiscriminatorConfig& config() const { return config_; }

  template <typename T>
  ParameterSet<T> init_params(Rng& rng) const;

  void check_input(const Shape& shape) const;

  /// Patch grid shape for a given input shape.
  Shape grid_shape(const Shape& input) const;

  template <typename T>
  DiscriminatorOutput<T> forward(const BoundParams<T>& params, const ag::Var<T>& images) const;

 private:
  DiscriminatorConfig config_;
};

}  // namespace metalgan
