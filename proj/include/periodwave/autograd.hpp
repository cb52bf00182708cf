#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "periodwave/tensor.hpp"

namespace periodwave {

// Reverse-mode differentiation over Tensor values. Every op returns a Var;
// when any input requires a gradient (and grad mode is on) the result keeps
// its parents and a closure that pushes its gradient back into them.

namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Mat<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Mat<Scalar>& grad_ref() {
    if (grad.size() == 0) grad = Mat<Scalar>::Zero(value.data.rows(), value.data.cols());
    return grad;
  }
  bool has_grad() const { return grad.size() != 0; }
};

template <typename Scalar>
class Var {
 public:
  using NodeT = Node<Scalar>;

  Var() = default;
  explicit Var(Tensor<Scalar> t, bool requires_grad = false) : node_(std::make_shared<NodeT>()) {
    node_->value = std::move(t);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<NodeT> n) : node_(std::move(n)) {}

  static Var constant(Mat<Scalar> data, Layout layout) { return Var(Tensor<Scalar>(std::move(data), std::move(layout))); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<Scalar>& value() const { return node_->value; }
  Tensor<Scalar>& value() { return node_->value; }
  const Mat<Scalar>& data() const { return node_->value.data; }
  Mat<Scalar>& data() { return node_->value.data; }
  const Layout& layout() const { return node_->value.segs; }
  bool requires_grad() const { return node_->requires_grad; }
  Mat<Scalar>& grad() { return node_->grad_ref(); }
  bool has_grad() const { return node_->has_grad(); }
  void zero_grad() { node_->grad.resize(0, 0); }
  const std::shared_ptr<NodeT>& node() const { return node_; }

 private:
  std::shared_ptr<NodeT> node_;
};

// Wraps an op result. The closure receives the result node; parents are in
// node.parents in the order given here.
template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> parents,
                        std::function<void(Node<Scalar>&)> backward) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Var<Scalar>(std::move(node));
}

template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, const std::vector<Var<Scalar>>& parents,
                        std::function<void(Node<Scalar>&)> backward) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Var<Scalar>(std::move(node));
}

// Back-propagates from a 1x1 root. Gradients accumulate into every reachable
// node that requires one; intermediate gradients are released afterwards.
template <typename Scalar>
void backward(const Var<Scalar>& root) {
  if (root.data().size() != 1) throw std::invalid_argument("backward: root must be a scalar");
  if (!root.requires_grad()) return;

  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> seen;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node<Scalar>* p = n->parents[i++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->grad_ref().setConstant(Scalar(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* n = *it;
    if (n->backward && n->has_grad()) n->backward(*n);
    if (n->backward) n->grad.resize(0, 0);
  }
}

}  // namespace periodwave
