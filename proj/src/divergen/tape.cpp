#include "divergen/tape.hpp"

#include <limits>

#include "divergen/errors.hpp"

namespace divergen {

NodeId Tape::push(Node node) {
  if (nodes_.size() >= static_cast<std::size_t>(std::numeric_limits<NodeId>::max())) {
    throw ContractError("tape node limit exceeded");
  }
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

NodeId Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = false;
  return push(std::move(n));
}

NodeId Tape::make_node(Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  for (NodeId in : n.inputs) {
    if (in < 0 || static_cast<std::size_t>(in) >= nodes_.size()) {
      throw ContractError("tape op input refers to a node not on this tape");
    }
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  if (n.requires_grad) {
    n.backward_fn = std::move(backward);
  }
  return push(std::move(n));
}

Tensor& Tape::grad(NodeId id) {
  Node& n = nodes_[id];
  if (!n.grad_allocated) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_allocated = true;
  }
  return n.grad;
}

void Tape::accumulate_grad(NodeId id, const Tensor& delta) {
  if (!nodes_[id].requires_grad) {
    return;
  }
  Tensor& g = grad(id);
  if (!g.same_shape(delta)) {
    throw DimensionError("gradient shape " + delta.shape_str() +
                         " does not match value shape " + g.shape_str());
  }
  double* gd = g.data();
  const double* dd = delta.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    gd[i] += dd[i];
  }
}

void Tape::backward(NodeId root) {
  if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size()) {
    throw ContractError("backward root is not on this tape");
  }
  if (nodes_[root].value.size() != 1) {
    throw ContractError("backward requires a scalar root, got shape " +
                        nodes_[root].value.shape_str());
  }
  grad(root)[0] = 1.0;
  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    // Nodes whose gradient buffer was never touched received no signal.
    if (!n.requires_grad || !n.grad_allocated || !n.backward_fn) {
      continue;
    }
    n.backward_fn(*this, id);
  }
}

}  // namespace divergen
