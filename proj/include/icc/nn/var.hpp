#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "icc/core/tensor.hpp"

namespace icc::nn {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One value in the computation tape. Children hold their parents, never the
/// other way round, so a graph is released as soon as its root goes away.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      grad = Matrix::Zero(value.rows(), value.cols());
    }
    return grad;
  }
  bool has_grad() const { return grad.size() != 0 && grad.size() == value.size(); }
};

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// Disables tape recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Shared handle to a tape node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad_buffer(); }
  Matrix& mutable_grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  const NodePtr& node() const { return node_; }

  void zero_grad() {
    if (node_->grad.size() != 0) node_->grad.setZero();
  }

 private:
  NodePtr node_;
};

/// Records a new node. When recording is off or no parent needs a gradient
/// the result is a plain constant.
inline Var make_result(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

/// Reverse-mode sweep from a scalar root. Gradients accumulate into every
/// node that requires one, including parameters.
inline void backward(const Var& root) {
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // iterative post-order DFS
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer().setConstant(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->has_grad()) node->backward(*node);
  }
}

}  // namespace icc::nn
