#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "divergen/seq2seq.hpp"
#include "divergen/tape.hpp"
#include "divergen/tokenfreq.hpp"

namespace divergen {

struct LossConfig {
  enum class Kind { SCE, ITF };
  Kind kind = Kind::SCE;
  double lambda = 0.4;
  WeightVector weights;  // all ones for SCE

  static LossConfig sce(std::size_t vocab_size);
  static LossConfig itf(const FrequencyTable& freq, double lambda);
};

/// -log softmax(x)[c], computed via the stable log-sum-exp form.
double sce_loss(const Tensor& logits, int target);

/// w_c * sce_loss; with all-ones weights this is exactly the SCE loss.
double itf_loss(const Tensor& logits, int target, const WeightVector& weights);

/// Sum of itf_loss over the non-PAD steps of one sequence.
double sequence_loss(const std::vector<Tensor>& step_logits,
                     const std::vector<int>& targets,
                     const WeightVector& weights,
                     const std::vector<bool>& pad_mask);

/// Taped building blocks used by the trainer. `weighted_nll` returns the
/// per-example losses [B] for one time step: out[b] = -w[b] *
/// log_softmax(logits)[b, target[b]]; a zero weight masks the step out.
NodeId weighted_nll(Tape& tape, NodeId logits, std::span<const int> targets,
                    std::span<const double> row_weights);

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  explicit AdamState(const ModelParams& params, double lr = 3e-4);
};

/// Standard Adam update with bias correction. `grads` must be aligned with
/// the parameter registration order; non-finite gradients raise a
/// NumericError naming the offending parameter.
void adam_step(ModelParams& params, const std::vector<Tensor>& grads,
               AdamState& state);

struct IdPair {
  IdSequence source;  // SOS ... EOS wrapped
  IdSequence target;  // raw target ids, no specials
};

struct TrainOptions {
  int epochs = 100;
  int batch_size = 32;
  double lr = 3e-4;
  std::uint64_t seed = 0;
};

struct TrainReport {
  // Mean loss per supervised (non-PAD) target token, per epoch.
  std::vector<double> epoch_loss;
  std::vector<double> epoch_seconds;

  double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

/// Teacher-forced training: decoder input is SOS + target prefix, the
/// supervised target ends with EOS, PAD steps are masked out. Examples are
/// shuffled each epoch from the "shuffle" stream of the seed; everything is
/// deterministic given (params, pairs, seed). Progress lines go to `log`
/// when provided, one per epoch: `epoch=<n> loss=<float> seconds=<float>`.
TrainReport train(ModelParams& params, const std::vector<IdPair>& pairs,
                  const LossConfig& loss, const TrainOptions& options,
                  std::ostream* log = nullptr);

}  // namespace divergen
