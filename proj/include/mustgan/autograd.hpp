#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mustgan/tensor.hpp"

namespace mustgan {

/// One vertex of a dynamically built reverse-mode graph. Leaves are either constants
/// (requires_grad == false) or trainable parameters owned by a ParamStore.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  Tensor<T>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
  void zero_grad() {
    if (!grad.empty()) grad.fill(T(0));
  }
  const Shape& shape() const { return value.shape(); }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return n;
}

template <typename T>
Var<T> leaf(Tensor<T> value, bool requires_grad) {
  auto n = constant(std::move(value));
  n->requires_grad = requires_grad;
  return n;
}

/// Builds an interior node. The backward closure is only attached when some parent
/// needs a gradient, so constant-only subgraphs stay cheap.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

/// Value copy cut off from the graph.
template <typename T>
Var<T> detach(const Var<T>& v) {
  return constant(v->value);
}

/// Accumulates d(root)/d(leaf) into every reachable leaf with requires_grad. `root` must be
/// a 1x1x1 scalar unless an explicit seed gradient is supplied.
template <typename T>
void backward(const Var<T>& root, const Tensor<T>* seed = nullptr) {
  if (!root->requires_grad) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  if (seed) {
    root->grad_buffer() += *seed;
  } else {
    if (root->value.size() != 1) fail("shape_mismatch", "backward() on non-scalar " + root->shape().str());
    root->grad_buffer()[0] += T(1);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

}  // namespace mustgan
