#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metalgan/tensor.hpp"

namespace metalgan {

/// Named, insertion-ordered collection of parameter arrays.
///
/// Network weights live here rather than inside layer objects so that the
/// meta-learning loop can clone, interpolate and serialize them as plain
/// values. Two sets built from the same network config always have the same
/// names, order and shapes.
template <typename T>
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  void add(std::string name, Tensor<T> value) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(value));
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  const Tensor<T>& at(const std::string& name) const { return entries_[position(name)].second; }
  Tensor<T>& at(const std::string& name) { return entries_[position(name)].second; }

  std::size_t position(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t count() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  /// Same names, order and shapes.
  bool compatible_with(const ParameterSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].first != other.entries_[i].first) return false;
      if (entries_[i].second.shape() != other.entries_[i].second.shape()) return false;
    }
    return true;
  }

  /// Zero-filled set with the same layout.
  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& [name, t] : entries_) out.add(name, Tensor<T>(t.shape()));
    return out;
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<U>());
    return out;
  }

  bool operator==(const ParameterSet& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Value-equal copy with independent storage.
template <typename T>
ParameterSet<T> clone_params(const ParameterSet<T>& params) {
  return params;
}

/// θ + rate·(θ̃ − θ), array by array. Both sets must share a layout.
template <typename T>
ParameterSet<T> reptile_update(const ParameterSet<T>& outer, const ParameterSet<T>& inner, T rate) {
  if (!outer.compatible_with(inner))
    throw ConfigError("reptile_update: parameter sets have different names or shapes");
  ParameterSet<T> out = outer;
  auto& dst = out.entries();
  const auto& in = inner.entries();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    Tensor<T>& theta = dst[i].second;
    const Tensor<T>& adapted = in[i].second;
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] = theta[j] + rate * (adapted[j] - theta[j]);
  }
  return out;
}

}  // namespace metalgan
