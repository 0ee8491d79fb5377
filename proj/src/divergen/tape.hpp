#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "divergen/tensor.hpp"

namespace divergen {

using NodeId = std::int32_t;

/// Reverse-mode derivative recorder. Operations append nodes in execution
/// order, which is already topological, so the backward pass is a single
/// reverse sweep that visits each node exactly once. A tape is confined to
/// one execution context; independent tapes may run in parallel.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, NodeId self)>;

  // Leaf whose gradient will be requested after backward (a parameter).
  NodeId leaf(Tensor value);

  // Node that never needs a gradient (inputs, masks).
  NodeId constant(Tensor value);

  /// Appends an op node. `backward` must add d(output)/d(input) * grad(self)
  /// into each differentiable input's gradient; primitives and fused ops
  /// (attention, losses) are all built through this one entry point.
  NodeId make_node(Tensor value, std::vector<NodeId> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

  // Gradient buffer, allocated as zeros on first touch.
  Tensor& grad(NodeId id);

  // Adds `delta` (same shape) into the gradient of `id` unless the node is
  // constant, in which case the call is a no-op.
  void accumulate_grad(NodeId id, const Tensor& delta);

  /// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. `root` must
  /// be a scalar. Leaves never reached keep an all-zero gradient.
  void backward(NodeId root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_allocated = false;
    bool requires_grad = false;
    std::vector<NodeId> inputs;
    BackwardFn backward_fn;
  };

  NodeId push(Node node);

  std::vector<Node> nodes_;
};

}  // namespace divergen
