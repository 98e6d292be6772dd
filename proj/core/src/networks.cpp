#include "metalgan/networks.hpp"

#include <algorithm>

namespace metalgan {
namespace {

constexpr double kInitStd = 0.02;

template <typename T>
Tensor<T> gaussian(Shape shape, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(kInitStd * rng.normal());
  return t;
}

template <typename T>
void add_norm(ParameterSet<T>& p, const std::string& prefix, int channels) {
  p.add(prefix + ".gamma", Tensor<T>({channels}, T(1)));
  p.add(prefix + ".beta", Tensor<T>({channels}, T(0)));
}

int encoder_channels(const GeneratorConfig& c, int level) { return c.base_channels << level; }

int disc_channels(const DiscriminatorConfig& c, int layer) { return c.base_channels << std::min(layer, 3); }

template <typename T>
ag::Var<T> norm_relu(const BoundParams<T>& p, const std::string& prefix, const ag::Var<T>& x) {
  return ag::relu(ag::instance_norm(x, p[prefix + ".gamma"], p[prefix + ".beta"]));
}

}  // namespace

void GeneratorConfig::validate() const {
  if (base_channels < 1) throw ConfigError("generator base_channels must be >= 1");
  if (n_downsample < 1) throw ConfigError("generator n_downsample must be >= 1");
  if (n_residual < 0) throw ConfigError("generator n_residual must be >= 0");
  if (channels < 1) throw ConfigError("generator channels must be >= 1");
}

void DiscriminatorConfig::validate() const {
  if (base_channels < 1) throw ConfigError("discriminator base_channels must be >= 1");
  if (n_layers < 1) throw ConfigError("discriminator n_layers must be >= 1");
  if (channels < 1) throw ConfigError("discriminator channels must be >= 1");
}

template <typename T>
BoundParams<T>::BoundParams(const ParameterSet<T>& params, bool requires_grad) : source_(&params) {
  vars_.reserve(params.count());
  for (const auto& [_, t] : params.entries())
    vars_.push_back(requires_grad ? ag::parameter<T>(t) : ag::constant<T>(t));
}

template <typename T>
ParameterSet<T> BoundParams<T>::gradients() const {
  ParameterSet<T> out;
  const auto& entries = source_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& v = vars_[i];
    if (v.requires_grad() && v.grad().size() == v.value().size())
      out.add(entries[i].first, v.grad());
    else
      out.add(entries[i].first, Tensor<T>(entries[i].second.shape()));
  }
  return out;
}

Generator::Generator(GeneratorConfig config) : config_(config) { config_.validate(); }

template <typename T>
ParameterSet<T> Generator::init_params(Rng& rng) const {
  const auto& c = config_;
  ParameterSet<T> p;
  p.add("enc0.conv.weight", gaussian<T>({c.base_channels, c.channels, 7, 7}, rng));
  add_norm(p, "enc0.norm", c.base_channels);
  for (int i = 1; i <= c.n_downsample; ++i) {
    const std::string name = "enc" + std::to_string(i);
    p.add(name + ".conv.weight", gaussian<T>({encoder_channels(c, i), encoder_channels(c, i - 1), 4, 4}, rng));
    add_norm(p, name + ".norm", encoder_channels(c, i));
  }
  const int bottleneck = encoder_channels(c, c.n_downsample);
  for (int r = 0; r < c.n_residual; ++r) {
    const std::string name = "res" + std::to_string(r);
    p.add(name + ".conv1.weight", gaussian<T>({bottleneck, bottleneck, 3, 3}, rng));
    add_norm(p, name + ".norm1", bottleneck);
    p.add(name + ".conv2.weight", gaussian<T>({bottleneck, bottleneck, 3, 3}, rng));
    add_norm(p, name + ".norm2", bottleneck);
  }
  const int skip = c.skip_connections ? 2 : 1;
  for (int i = c.n_downsample; i >= 1; --i) {
    const std::string name = "dec" + std::to_string(i);
    p.add(name + ".deconv.weight",
          gaussian<T>({skip * encoder_channels(c, i), encoder_channels(c, i - 1), 4, 4}, rng));
    add_norm(p, name + ".norm", encoder_channels(c, i - 1));
  }
  p.add("out.conv.weight", gaussian<T>({c.channels, skip * c.base_channels, 7, 7}, rng));
  p.add("out.conv.bias", Tensor<T>({c.channels}));
  return p;
}

void Generator::check_input(const Shape& s) const {
  if (s.size() != 4 || s[0] < 1 || s[1] != config_.channels || s[2] != s[3])
    throw ConfigError("generator input must be (n, " + std::to_string(config_.channels) + ", s, s), got " +
                      shape_string(s));
  const int factor = 1 << config_.n_downsample;
  if (s[2] % factor != 0 || s[2] < factor)
    throw ConfigError("generator input size " + std::to_string(s[2]) + " is not divisible by " +
                      std::to_string(factor));
}

template <typename T>
ag::Var<T> Generator::forward(const BoundParams<T>& p, const ag::Var<T>& images) const {
  check_input(images.shape());
  const auto& c = config_;
  const ag::Var<T> none;
  std::vector<ag::Var<T>> enc;
  enc.push_back(norm_relu(p, "enc0.norm", ag::conv2d(images, p["enc0.conv.weight"], none, 1, 3)));
  for (int i = 1; i <= c.n_downsample; ++i) {
    const std::string name = "enc" + std::to_string(i);
    enc.push_back(norm_relu(p, name + ".norm", ag::conv2d(enc.back(), p[name + ".conv.weight"], none, 2, 1)));
  }
  ag::Var<T> h = enc.back();
  for (int r = 0; r < c.n_residual; ++r) {
    const std::string name = "res" + std::to_string(r);
    ag::Var<T> t = norm_relu(p, name + ".norm1", ag::conv2d(h, p[name + ".conv1.weight"], none, 1, 1));
    t = ag::conv2d(t, p[name + ".conv2.weight"], none, 1, 1);
    t = ag::instance_norm(t, p[name + ".norm2.gamma"], p[name + ".norm2.beta"]);
    h = ag::add(h, t);
  }
  for (int i = c.n_downsample; i >= 1; --i) {
    const std::string name = "dec" + std::to_string(i);
    const ag::Var<T> in = c.skip_connections ? ag::concat_channels(h, enc[i]) : h;
    h = norm_relu(p, name + ".norm", ag::conv_transpose2d(in, p[name + ".deconv.weight"], none, 2, 1));
  }
  const ag::Var<T> in = c.skip_connections ? ag::concat_channels(h, enc[0]) : h;
  return ag::tanh(ag::conv2d(in, p["out.conv.weight"], p["out.conv.bias"], 1, 3));
}

template <typename T>
Tensor<T> Generator::forward(const ParameterSet<T>& params, const Tensor<T>& images) const {
  BoundParams<T> bound(params, false);
  return forward(bound, ag::constant(images)).value();
}

Discriminator::Discriminator(DiscriminatorConfig config) : config_(config) { config_.validate(); }

template <typename T>
ParameterSet<T> Discriminator::init_params(Rng& rng) const {
  const auto& c = config_;
  ParameterSet<T> p;
  int in = c.channels;
  for (int i = 0; i < c.n_layers; ++i) {
    const std::string name = "block" + std::to_string(i);
    const int out = disc_channels(c, i);
    p.add(name + ".conv.weight", gaussian<T>({out, in, 4, 4}, rng));
    p.add(name + ".conv.bias", Tensor<T>({out}));
    in = out;
  }
  p.add("adv.conv.weight", gaussian<T>({1, in, 3, 3}, rng));
  p.add("adv.conv.bias", Tensor<T>({1}));
  p.add("dom.conv.weight", gaussian<T>({1, in, 3, 3}, rng));
  p.add("dom.conv.bias", Tensor<T>({1}));
  return p;
}

void Discriminator::check_input(const Shape& s) const {
  if (s.size() != 4 || s[0] < 1 || s[1] != config_.channels)
    throw ConfigError("discriminator input must be (n, " + std::to_string(config_.channels) + ", h, w), got " +
                      shape_string(s));
  const int factor = 1 << config_.n_layers;
  if (s[2] % factor != 0 || s[3] % factor != 0 || s[2] < factor || s[3] < factor)
    throw ConfigError("discriminator input " + shape_string(s) + " is not divisible by " + std::to_string(factor));
}

Shape Discriminator::grid_shape(const Shape& input) const {
  check_input(input);
  const int factor = 1 << config_.n_layers;
  return {input[0], 1, input[2] / factor, input[3] / factor};
}

template <typename T>
DiscriminatorOutput<T> Discriminator::forward(const BoundParams<T>& p, const ag::Var<T>& images) const {
  check_input(images.shape());
  DiscriminatorOutput<T> out;
  ag::Var<T> h = images;
  for (int i = 0; i < config_.n_layers; ++i) {
    const std::string name = "block" + std::to_string(i);
    h = ag::leaky_relu(ag::conv2d(h, p[name + ".conv.weight"], p[name + ".conv.bias"], 2, 1), T(0.2));
    out.features.push_back(h);
  }
  out.adv = ag::conv2d(h, p["adv.conv.weight"], p["adv.conv.bias"], 1, 1);
  out.dom = ag::conv2d(h, p["dom.conv.weight"], p["dom.conv.bias"], 1, 1);
  return out;
}

template class BoundParams<float>;
template class BoundParams<double>;
template ParameterSet<float> Generator::init_params<float>(Rng&) const;
template ParameterSet<double> Generator::init_params<double>(Rng&) const;
template ag::Var<float> Generator::forward<float>(const BoundParams<float>&, const ag::Var<float>&) const;
template ag::Var<double> Generator::forward<double>(const BoundParams<double>&, const ag::Var<double>&) const;
template Tensor<float> Generator::forward<float>(const ParameterSet<float>&, const Tensor<float>&) const;
template Tensor<double> Generator::forward<double>(const ParameterSet<double>&, const Tensor<double>&) const;
template ParameterSet<float> Discriminator::init_params<float>(Rng&) const;
template ParameterSet<double> Discriminator::init_params<double>(Rng&) const;
template DiscriminatorOutput<float> Discriminator::forward<float>(const BoundParams<float>&,
                                                                  const ag::Var<float>&) const;
template DiscriminatorOutput<double> Discriminator::forward<double>(const BoundParams<double>&,
                                                                    const ag::Var<double>&) const;

}  // namespace metalgan
