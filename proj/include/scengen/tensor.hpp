// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "scengen/common.hpp"

namespace scengen {

namespace detail {

struct Node {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated (zeroed) iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Pulls this node's grad into the parents' grads. Reads grad of the node it
  // belongs to through a raw pointer; the graph walk keeps the node alive.
  std::function<void()> backprop;
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << shape[i] << (i + 1 < shape.size() ? "," : "");
  os << ']';
  return os.str();
}

}  // namespace detail

/// N-dimensional array of doubles with reverse-mode automatic
/// differentiation.
///
/// A Tensor is a cheap value-semantic handle onto a shared graph node. Ops on
/// tensors record their inputs, and `backward()` on a scalar result fills the
/// `grad()` buffer of every reachable tensor that `requires_grad()`. Leaf
/// gradients accumulate across calls until `zero_grad()`.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return make(std::move(shape), 0.0, requires_grad);
  }

  static Tensor full(std::vector<int> shape, double value,
                     bool requires_grad = false) {
    return make(std::move(shape), value, requires_grad);
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false) {
    validate_shape(shape);
    if (detail::shape_numel(shape) != values.size())
      throw ConfigError("tensor shape " + detail::shape_str(shape) +
                        " does not match " + std::to_string(values.size()) +
                        " values");
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->values.size(), 0.0);
    return Tensor(std::move(n));
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node()->shape; }
  int dim(int i) const { return node()->shape.at(static_cast<std::size_t>(i)); }
  std::size_t numel() const { return node()->values.size(); }
  bool is_scalar() const { return numel() == 1; }

  double* data() { return node()->values.data(); }
  const double* data() const { return node()->values.data(); }
  std::vector<double>& values() { return node()->values; }
  const std::vector<double>& values() const { return node()->values; }
  double operator[](std::size_t i) const { return node()->values[i]; }
  double& operator[](std::size_t i) { return node()->values[i]; }
  double item() const {
    if (!is_scalar()) throw ConfigError("item() on non-scalar tensor");
    return node()->values[0];
  }

  bool requires_grad() const { return node()->requires_grad; }
  bool has_grad() const { return !node()->grad.empty(); }
  std::vector<double>& grad() {
    if (!has_grad())
      throw ConfigError("tensor has no gradient buffer (requires_grad unset)");
    return node()->grad;
  }
  const std::vector<double>& grad() const {
    return const_cast<Tensor*>(this)->grad();
  }
  void zero_grad() {
    if (has_grad()) std::fill(node()->grad.begin(), node()->grad.end(), 0.0);
  }

  /// Leaf copy sharing nothing with the graph: same values, no history.
  Tensor detach() const {
    auto n = std::make_shared<detail::Node>();
    n->shape = node()->shape;
    n->values = node()->values;
    return Tensor(std::move(n));
  }

  /// Reverse-mode sweep from a scalar. Topologically orders the reachable
  /// grad-requiring subgraph and runs each node's backprop exactly once.
  void backward() const {
    if (!is_scalar())
      throw ConfigError("backward() requires a scalar tensor, got shape " +
                        detail::shape_str(shape()));
    detail::Node* root = node();
    if (!root->requires_grad) return;

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    // Iterative post-order DFS.
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        detail::Node* p = n->parents[next++].get();
        if (p->requires_grad && visited.insert(p).second)
          stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }

    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backprop) (*it)->backprop();
  }

  // Graph-construction hooks used by the op layer.
  detail::Node* node() const {
    if (!node_) throw ConfigError("operation on an undefined tensor");
    return node_.get();
  }
  std::shared_ptr<detail::Node> share() const { return node_; }

  static Tensor adopt(std::shared_ptr<detail::Node> n) {
    return Tensor(std::move(n));
  }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  static void validate_shape(const std::vector<int>& shape) {
    if (shape.empty()) throw ConfigError("tensor shape may not be empty");
    for (int d : shape)
      if (d <= 0)
        throw ConfigError("tensor dimensions must be positive, got " +
                          detail::shape_str(shape));
  }

  static Tensor make(std::vector<int> shape, double fill, bool requires_grad) {
    validate_shape(shape);
    auto n = std::make_shared<detail::Node>();
    n->values.assign(detail::shape_numel(shape), fill);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->values.size(), 0.0);
    return Tensor(std::move(n));
  }

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

/// Builds a result node wired to its inputs. The backprop callable receives
/// the raw result node (for grad/values) only through captures made by the
/// op; this helper just handles requires_grad plumbing.
inline Tensor make_result(std::vector<int> shape, std::vector<double> values,
                          std::vector<Tensor> inputs,
                          std::function<void(Node*)> make_backprop) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  for (const auto& in : inputs)
    if (in.node()->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->grad.assign(n->values.size(), 0.0);
    for (const auto& in : inputs) n->parents.push_back(in.share());
    make_backprop(n.get());
  }
  return Tensor::adopt(std::move(n));
}

inline void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericError(std::string("non-finite value in ") + what);
}

}  // namespace detail

}  // namespace scengen
