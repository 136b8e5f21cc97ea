#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mustgan/ops.hpp"

namespace mustgan {

/// Ordered, name-keyed set of trainable leaves. Names are unique; insertion order is the
/// serialization order.
template <typename T>
class ParamStore {
 public:
  Var<T> add(const std::string& name, Tensor<T> init) {
    for (const auto& [n, _] : entries_)
      if (n == name) fail("duplicate_parameter", name);
    auto v = leaf(std::move(init), trainable_);
    entries_.emplace_back(name, v);
    return v;
  }

  Var<T> find(const std::string& name) const {
    for (const auto& [n, v] : entries_)
      if (n == name) return v;
    return nullptr;
  }

  const std::vector<std::pair<std::string, Var<T>>>& entries() const { return entries_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.second->zero_grad();
  }

  /// Frozen stores do not accumulate gradients; ops skip their weight-gradient work.
  void set_trainable(bool on) {
    trainable_ = on;
    for (auto& e : entries_) e.second->requires_grad = on;
  }
  bool trainable() const { return trainable_; }

 private:
  std::vector<std::pair<std::string, Var<T>>> entries_;
  bool trainable_ = true;
};

namespace init {

template <typename T>
Tensor<T> normal(Shape s, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(s);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

/// He-normal for a given fan-in and rectifier slope.
inline double he_std(int fan_in, double slope) {
  return std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in));
}

}  // namespace init

template <typename T>
struct Conv2d {
  Var<T> weight;
  Var<T> bias;
  int stride = 1;
  int pad = 0;

  static Conv2d create(ParamStore<T>& store, const std::string& name, int cin, int cout, int k, int stride, Rng& rng,
                       double slope = 0.0) {
    Conv2d c;
    c.weight = store.add(name + ".weight", init::normal<T>({cout, cin, k * k}, init::he_std(cin * k * k, slope), rng));
    c.bias = store.add(name + ".bias", Tensor<T>(cout, 1, 1));
    c.stride = stride;
    c.pad = k / 2;
    return c;
  }

  int in_channels() const { return weight->shape().h; }
  int out_channels() const { return weight->shape().c; }

  Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight, bias, stride, pad); }
};

template <typename T>
struct Linear {
  Var<T> weight;
  Var<T> bias;

  static Linear create(ParamStore<T>& store, const std::string& name, int in, int out, Rng& rng, double slope = 0.0) {
    Linear l;
    l.weight = store.add(name + ".weight", init::normal<T>({out, in, 1}, init::he_std(in, slope), rng));
    l.bias = store.add(name + ".bias", Tensor<T>(out, 1, 1));
    return l;
  }

  int in_features() const { return weight->shape().h; }
  int out_features() const { return weight->shape().c; }

  Var<T> operator()(const Var<T>& v) const { return ops::linear(v, weight, bias); }
};

}  // namespace mustgan
