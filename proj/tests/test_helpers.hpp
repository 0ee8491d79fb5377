#pragma once

// Shared builders for the model-level tests and the acceptance suite.

#include <vector>

#include "divergen/gradcheck.hpp"
#include "divergen/objectives.hpp"
#include "divergen/ops.hpp"
#include "divergen/rng.hpp"
#include "divergen/seq2seq.hpp"

namespace testutil {

using namespace divergen;

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng.next_uniform(lo, hi);
  }
  return t;
}

/// Teacher-forced loss of one (source, target) pair on an existing tape with
/// already-registered parameter leaves. Mirrors what the trainer does for a
/// batch of one.
inline NodeId pair_loss(Tape& tape, const ParamLeaves& leaves,
                        const IdSequence& source, const IdSequence& target,
                        const WeightVector& weights) {
  EncoderOutput enc = encode(tape, leaves, source);
  DecoderState state = decoder_start(tape, leaves, enc);
  NodeId total = -1;
  for (std::size_t t = 0; t <= target.size(); ++t) {
    std::vector<int> prev{t == 0 ? kSosId : target[t - 1]};
    std::vector<int> out{t < target.size() ? target[t] : kEosId};
    std::vector<double> w{weights[out[0]]};
    NodeId logits = decode_step(tape, leaves, state, prev, &enc);
    NodeId nll = weighted_nll(tape, logits, out, w);
    total = t == 0 ? nll : ops::add(tape, total, nll);
  }
  return ops::sum(tape, total);
}

/// Flattens model parameters for grad_check and rebuilds the loss from
/// perturbed copies.
struct PairLossProblem {
  ModelConfig config;
  IdSequence source;
  IdSequence target;
  WeightVector weights;

  std::vector<Tensor> param_tensors(const ModelParams& params) const {
    std::vector<Tensor> out;
    out.reserve(params.count());
    for (std::size_t i = 0; i < params.count(); ++i) {
      out.push_back(params.tensor(i));
    }
    return out;
  }

  ScalarBuilder builder() const {
    return [this](Tape& tape, const std::vector<NodeId>& leaves) {
      ModelParams shaped(config);
      ParamLeaves pl;
      pl.params = &shaped;
      pl.ids = leaves;
      return pair_loss(tape, pl, source, target, weights);
    };
  }
};

}  // namespace testutil
