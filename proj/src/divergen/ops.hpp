#pragma once

#include <span>

#include "divergen/tape.hpp"

namespace divergen {
namespace ops {

/// Primitive tape operations. Row-wise ops (softmax, log_softmax) act on the
/// last dimension. The only broadcast supported anywhere is bias-add of a
/// [1,n] or [n] vector over the rows of an [m,n] matrix.

NodeId matmul(Tape& tape, NodeId a, NodeId b);
NodeId add(Tape& tape, NodeId a, NodeId b);
NodeId mul(Tape& tape, NodeId a, NodeId b);
NodeId concat(Tape& tape, NodeId a, NodeId b);
NodeId slice(Tape& tape, NodeId a, std::size_t begin, std::size_t len);
NodeId sigmoid(Tape& tape, NodeId a);
NodeId tanh(Tape& tape, NodeId a);
NodeId softmax(Tape& tape, NodeId a);
NodeId log_softmax(Tape& tape, NodeId a);
NodeId embedding_lookup(Tape& tape, NodeId table, std::span<const int> ids);
NodeId sum(Tape& tape, NodeId a);
NodeId scale(Tape& tape, NodeId a, double factor);

}  // namespace ops
}  // namespace divergen
