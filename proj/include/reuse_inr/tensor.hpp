// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "reuse_inr/errors.hpp"

namespace reuse_inr {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array with an optional gradient buffer.
///
/// Copies share the underlying node (handle semantics), so a parameter
/// referenced from several places in a graph is one node and its gradient
/// accumulates every use.
template <typename Scalar_>
class Tensor {
public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    for (Index d : shape) {
      if (d <= 0) fail(ErrorKind::Dimension, "tensor dims must be positive, got " + shape_string(shape));
    }
    node_->shape = std::move(shape);
    node_->values = Array::Zero(numel(node_->shape));
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, Array values, bool requires_grad = false) : Tensor(std::move(shape), requires_grad) {
    if (values.size() != node_->values.size()) {
      fail(ErrorKind::Dimension, "value count " + std::to_string(values.size()) + " does not match shape " +
                                     shape_string(node_->shape));
    }
    node_->values = std::move(values);
  }

  static Tensor scalar(Scalar v, bool requires_grad = false) {
    Array a(1);
    a[0] = v;
    return Tensor(Shape{}, std::move(a), requires_grad);
  }

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index size() const { return node_->values.size(); }

  /// Axis length; negative axes count from the end.
  Index dim(Index axis) const {
    const Index r = rank();
    const Index a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) fail(ErrorKind::Dimension, "axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
    return node_->shape[static_cast<std::size_t>(a)];
  }

  Array& values() { return node_->values; }
  const Array& values() const { return node_->values; }
  Scalar* data() { return node_->values.data(); }
  const Scalar* data() const { return node_->values.data(); }

  Scalar item() const {
    if (size() != 1) fail(ErrorKind::Usage, "item() on tensor of shape " + shape_string(shape()));
    return node_->values[0];
  }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const noexcept { return node_ && node_->grad.size() == node_->values.size(); }

  const Array& grad() const {
    if (!has_grad()) fail(ErrorKind::Usage, "tensor has no gradient");
    return node_->grad;
  }

  /// Mutable gradient buffer, zero-allocated on first access. Const because
  /// gradients live in the shared node, not in the handle.
  Array& grad_buffer() const {
    if (!has_grad()) node_->grad = Array::Zero(node_->values.size());
    return node_->grad;
  }

  void zero_grad() { node_->grad.resize(0); }

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

  /// Deep copy of shape and values; the copy carries no gradient.
  Tensor clone(bool requires_grad = false) const { return Tensor(shape(), values(), requires_grad); }

  template <typename Other>
  Tensor<Other> cast(bool requires_grad = false) const {
    return Tensor<Other>(shape(), values().template cast<Other>(), requires_grad);
  }

private:
  struct Node {
    Shape shape;
    Array values;
    Array grad;
    bool requires_grad = false;
  };

  std::shared_ptr<Node> node_;
};

/// Ordered record of differentiable operations.
///
/// Operations append their backward rule in execution order, which is a
/// topological order of the graph; backward() replays the rules in exact
/// reverse. A disabled tape records nothing (inference mode).
template <typename Scalar>
class Tape {
public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return rules_.size(); }

  /// True when an op over these inputs must be recorded.
  template <typename... Ts>
  bool tracks(const Ts&... inputs) const {
    return recording_ && (inputs.requires_grad() || ...);
  }

  void record(std::function<void()> rule) { rules_.push_back(std::move(rule)); }

  void backward(Tensor<Scalar>& loss) {
    if (loss.size() != 1) fail(ErrorKind::Usage, "backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    if (!loss.requires_grad()) fail(ErrorKind::Usage, "loss is not reachable from any tensor that requires grad");
    loss.grad_buffer()[0] += Scalar(1);
    for (auto it = rules_.rbegin(); it != rules_.rend(); ++it) (*it)();
    rules_.clear();
  }

  void clear() { rules_.clear(); }

private:
  bool recording_;
  std::vector<std::function<void()>> rules_;
};

}  // namespace reuse_inr
