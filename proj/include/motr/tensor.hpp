#pragma once

// Dense tensor with define-by-run reverse-mode differentiation.
//
// Every Tensor owns a shared graph node. Operations that touch a tensor with
// requires_grad() record their inputs and a backward rule on the result node;
// backward() linearizes the reachable graph into a Tape (topological order)
// and replays it in reverse, accumulating gradients additively.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace motr {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AutogradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace detail {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool consumed = false;
  // Number of times a gradient contribution has landed on this node.
  std::size_t accumulations = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return parents.empty(); }

  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    ++accumulations;
    return grad;
  }
};

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) {
    detail::grad_mode_flag() = false;
  }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor from(Shape shape, std::vector<T> values,
                     bool requires_grad = false) {
    if (shape.empty()) shape = {1};
    for (auto e : shape)
      if (e == 0)
        throw DimensionError("tensor extents must be positive, got " +
                             to_string(shape));
    if (motr::numel(shape) != values.size())
      throw DimensionError("shape " + to_string(shape) + " needs " +
                           std::to_string(motr::numel(shape)) + " values, got " +
                           std::to_string(values.size()));
    auto node = std::make_shared<detail::Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor full(Shape shape, T fill, bool requires_grad = false) {
    auto n = motr::numel(shape);
    return from(std::move(shape), std::vector<T>(n, fill), requires_grad);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }
  static Tensor scalar(T v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }
  static Tensor param(Shape shape, std::vector<T> values) {
    return from(std::move(shape), std::move(values), true);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  // Direct mutation is reserved for leaves (optimizer updates, loading).
  std::span<T> mutable_data() {
    if (!node_->is_leaf())
      throw AutogradError("in-place mutation of a non-leaf tensor");
    return node_->value;
  }
  std::vector<T> values() const { return node_->value; }

  T item() const {
    if (numel() != 1)
      throw DimensionError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }
  T operator[](std::size_t i) const { return node_->value[i]; }
  T at(std::size_t r, std::size_t c) const {
    return node_->value[r * node_->shape.back() + c];
  }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf(); }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::size_t grad_accumulations() const { return node_->accumulations; }
  void zero_grad() {
    node_->grad.clear();
    node_->accumulations = 0;
  }
  const char* op_name() const { return node_->op; }

  Tensor detach() const {
    return from(node_->shape, node_->value, false);
  }

  detail::Node<T>& node() const { return *node_; }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

// Ordered record of the operations reachable from a root. Every node appears
// after all of its inputs.
template <class T>
class Tape {
 public:
  explicit Tape(const Tensor<T>& root) {
    std::unordered_set<const detail::Node<T>*> seen;
    std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
    stack.emplace_back(&root.node(), 0);
    seen.insert(&root.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        auto* parent = node->parents[next++].get();
        if (parent->requires_grad && seen.insert(parent).second)
          stack.emplace_back(parent, 0);
      } else {
        order_.push_back(node);
        stack.pop_back();
      }
    }
  }

  const std::vector<detail::Node<T>*>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

  void replay_backward() const {
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      auto* node = *it;
      if (node->is_leaf()) {
        if (node->grad.empty()) node->grad.assign(node->value.size(), T(0));
        continue;
      }
      if (node->grad.empty()) continue;
      if (node->backward) node->backward(*node);
    }
  }

 private:
  std::vector<detail::Node<T>*> order_;
};

template <class T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined()) throw AutogradError("backward on undefined tensor");
  if (loss.numel() != 1)
    throw AutogradError("backward needs a scalar loss, got shape " +
                        to_string(loss.shape()));
  if (!loss.requires_grad())
    throw AutogradError("backward on a detached loss (no gradient tape)");
  auto& root = loss.node();
  if (root.consumed)
    throw AutogradError("backward called twice on the same graph");
  Tape<T> tape(loss);
  for (auto* n : tape.order())
    if (!n->is_leaf()) n->grad.clear();
  root.grad.assign(1, T(1));
  tape.replay_backward();
  for (auto* n : tape.order()) n->consumed = true;
  // Leaves stay usable across graphs.
  for (auto* n : tape.order())
    if (n->is_leaf()) n->consumed = false;
}

}  // namespace motr
