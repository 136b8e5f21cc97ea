#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mustgan/params.hpp"

namespace mustgan {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over every entry of one ParamStore.
template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& store, AdamOptions opt) : store_(&store), opt_(opt) {
    if (!(opt.lr > 0)) fail("invalid_config", "learning rate must be positive");
    for (const auto& [_, v] : store.entries()) {
      m_.emplace_back(v->shape());
      v_.emplace_back(v->shape());
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(opt_.beta1), b2 = static_cast<T>(opt_.beta2);
    const T step = static_cast<T>(opt_.lr / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(opt_.eps);
    const auto& entries = store_->entries();
    for (std::size_t p = 0; p < entries.size(); ++p) {
      auto& node = *entries[p].second;
      if (node.grad.empty()) continue;
      auto& m = m_[p];
      auto& v = v_[p];
      for (std::size_t i = 0; i < node.value.size(); ++i) {
        const T g = node.grad[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        node.value[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
      }
    }
  }

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const AdamOptions& options() const { return opt_; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }

 private:
  ParamStore<T>* store_;
  AdamOptions opt_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::int64_t t_ = 0;
};

}  // namespace mustgan
