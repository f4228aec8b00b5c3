#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "polytraj/array.hpp"

namespace polytraj::ad {

struct NodeImpl {
  Array value;
  Array grad;  // empty shape+size 1 until first accumulation; see has_grad
  bool has_grad = false;
  bool requires_grad = false;
  std::uint64_t id = 0;  // creation order, a valid topological order
  const char* op = "leaf";
  std::vector<std::shared_ptr<NodeImpl>> parents;
  std::function<void(NodeImpl&)> backward;
};

/// Handle to a value in the computation graph. Copies share the node.
class Node {
 public:
  Node() = default;
  explicit Node(std::shared_ptr<NodeImpl> impl) : impl_(std::move(impl)) {}

  const Array& value() const { return impl_->value; }
  Array& mutable_value() { return impl_->value; }
  /// Gradient of the last backward pass; zeros if none reached this node.
  Array grad() const;
  bool has_grad() const { return impl_->has_grad; }
  void zero_grad();
  Array& mutable_grad();

  bool requires_grad() const { return impl_->requires_grad; }
  const Shape& shape() const { return impl_->value.shape(); }
  const char* op() const { return impl_->op; }
  explicit operator bool() const { return static_cast<bool>(impl_); }

  const std::shared_ptr<NodeImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<NodeImpl> impl_;
};

Node constant(Array value);
Node variable(Array value);

/// While alive on the current thread, ops build constant nodes and record nothing.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Elementwise binary ops broadcast over 1-extents of the 2-D view.
Node add(const Node& a, const Node& b);
Node sub(const Node& a, const Node& b);
Node mul(const Node& a, const Node& b);
Node matmul(const Node& a, const Node& b);

Node sigmoid(const Node& x);
Node tanh(const Node& x);
Node exp(const Node& x);
Node log(const Node& x);
Node power(const Node& x, double exponent);
Node scale(const Node& x, double factor);

/// Sum of all elements (scalar result).
Node sum(const Node& x);
/// Sum along axis of the 2-D view, keeping the reduced extent as 1.
Node sum(const Node& x, int axis);
Node mean(const Node& x);
Node mean(const Node& x, int axis);

Node concat(std::span<const Node> parts, int axis);
Node slice(const Node& x, int axis, std::size_t begin, std::size_t end);
/// Softmax over the last axis.
Node softmax(const Node& x);

inline Node operator+(const Node& a, const Node& b) { return add(a, b); }
inline Node operator-(const Node& a, const Node& b) { return sub(a, b); }
inline Node operator*(const Node& a, const Node& b) { return mul(a, b); }

/// Reverse pass from a scalar. Leaf gradients accumulate across calls until
/// cleared; intermediate gradients are reset at the start of each call.
void backward(const Node& loss);

}  // namespace polytraj::ad
