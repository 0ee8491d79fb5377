#include "divergen/objectives.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "divergen/errors.hpp"
#include "divergen/ops.hpp"
#include "divergen/rng.hpp"

namespace divergen {

LossConfig LossConfig::sce(std::size_t vocab_size) {
  LossConfig c;
  c.kind = Kind::SCE;
  c.lambda = 0.0;
  c.weights = WeightVector::ones(vocab_size);
  return c;
}

LossConfig LossConfig::itf(const FrequencyTable& freq, double lambda) {
  LossConfig c;
  c.kind = Kind::ITF;
  c.lambda = lambda;
  c.weights = compute_weights(freq, lambda);
  return c;
}

namespace {

void check_target(const Tensor& logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw ContractError("loss target " + std::to_string(target) +
                        " out of range for logits " + logits.shape_str());
  }
}

}  // namespace

double sce_loss(const Tensor& logits, int target) {
  check_target(logits, target);
  Tape tape;
  NodeId lp = ops::log_softmax(tape, tape.constant(logits));
  return -tape.value(lp)[static_cast<std::size_t>(target)];
}

double itf_loss(const Tensor& logits, int target, const WeightVector& weights) {
  check_target(logits, target);
  if (weights.size() != logits.size()) {
    throw ContractError("weight vector size does not match logits");
  }
  return weights[static_cast<std::size_t>(target)] * sce_loss(logits, target);
}

double sequence_loss(const std::vector<Tensor>& step_logits,
                     const std::vector<int>& targets,
                     const WeightVector& weights,
                     const std::vector<bool>& pad_mask) {
  if (step_logits.size() != targets.size() || targets.size() != pad_mask.size()) {
    throw ContractError("sequence_loss: logits, targets, and mask lengths differ");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (pad_mask[t]) {
      continue;
    }
    total += itf_loss(step_logits[t], targets[t], weights);
  }
  return total;
}

NodeId weighted_nll(Tape& tape, NodeId logits, std::span<const int> targets,
                    std::span<const double> row_weights) {
  const Tensor& x = tape.value(logits);
  std::size_t batch = x.rows();
  std::size_t vocab = x.cols();
  if (targets.size() != batch || row_weights.size() != batch) {
    throw ContractError("weighted_nll: batch size mismatch");
  }
  for (int c : targets) {
    if (c < 0 || static_cast<std::size_t>(c) >= vocab) {
      throw ContractError("weighted_nll: target id out of range");
    }
  }
  NodeId lp = ops::log_softmax(tape, logits);
  const Tensor& lpv = tape.value(lp);
  Tensor out({batch});
  std::vector<int> ts(targets.begin(), targets.end());
  std::vector<double> ws(row_weights.begin(), row_weights.end());
  for (std::size_t b = 0; b < batch; ++b) {
    out[b] = -ws[b] * lpv[b * vocab + static_cast<std::size_t>(ts[b])];
  }
  return tape.make_node(std::move(out), {lp},
                        [lp, ts = std::move(ts), ws = std::move(ws),
                         vocab](Tape& t, NodeId self) {
                          if (!t.requires_grad(lp)) {
                            return;
                          }
                          const Tensor& g = t.grad(self);
                          Tensor& gl = t.grad(lp);
                          for (std::size_t b = 0; b < ts.size(); ++b) {
                            gl[b * vocab + static_cast<std::size_t>(ts[b])] -=
                                ws[b] * g[b];
                          }
                        });
}

AdamState::AdamState(const ModelParams& params, double lr) : lr(lr) {
  m.reserve(params.count());
  v.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    m.push_back(Tensor::zeros(params.tensor(i).shape()));
    v.push_back(Tensor::zeros(params.tensor(i).shape()));
  }
}

void adam_step(ModelParams& params, const std::vector<Tensor>& grads,
               AdamState& state) {
  if (grads.size() != params.count()) {
    throw ContractError("adam_step: gradient count does not match parameters");
  }
  ++state.step;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.count(); ++i) {
    Tensor& p = params.tensor(i);
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) {
      throw ContractError("adam_step: gradient shape mismatch for " + params.name(i));
    }
    if (!g.all_finite()) {
      throw NumericError("non-finite gradient in parameter " + params.name(i));
    }
    Tensor& mi = state.m[i];
    Tensor& vi = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      mi[j] = state.beta1 * mi[j] + (1.0 - state.beta1) * g[j];
      vi[j] = state.beta2 * vi[j] + (1.0 - state.beta2) * g[j] * g[j];
      double m_hat = mi[j] / bc1;
      double v_hat = vi[j] / bc2;
      p[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

namespace {

struct Batch {
  std::vector<IdSequence> sources;
  std::vector<std::vector<int>> dec_in;   // [T][B], SOS + target prefix
  std::vector<std::vector<int>> dec_out;  // [T][B], target + EOS, PAD padded
  std::vector<std::vector<double>> step_weights;  // 0 on PAD steps
  std::size_t supervised_tokens = 0;
};

Batch make_batch(const std::vector<IdPair>& pairs, const std::vector<std::size_t>& idx,
                 std::size_t begin, std::size_t end, const WeightVector& weights,
                 const ModelConfig& config) {
  Batch batch;
  std::size_t n = end - begin;
  std::size_t max_target = 0;
  std::vector<std::vector<int>> rows;
  rows.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const IdPair& pair = pairs[idx[begin + k]];
    IdSequence source = pair.source;
    if (source.size() > static_cast<std::size_t>(config.max_len)) {
      source.resize(static_cast<std::size_t>(config.max_len) - 1);
      source.push_back(kEosId);
    }
    IdSequence target = pair.target;
    if (target.size() > static_cast<std::size_t>(config.max_len) - 2) {
      target.resize(static_cast<std::size_t>(config.max_len) - 2);
    }
    batch.sources.push_back(std::move(source));
    max_target = std::max(max_target, target.size());
    rows.push_back(std::move(target));
  }
  std::size_t steps = max_target + 1;  // every example supervises EOS
  batch.dec_in.assign(steps, std::vector<int>(n, kPadId));
  batch.dec_out.assign(steps, std::vector<int>(n, kPadId));
  batch.step_weights.assign(steps, std::vector<double>(n, 0.0));
  for (std::size_t b = 0; b < n; ++b) {
    const std::vector<int>& target = rows[b];
    for (std::size_t t = 0; t < steps; ++t) {
      int input = t == 0 ? kSosId : (t - 1 < target.size() ? target[t - 1] : kPadId);
      batch.dec_in[t][b] = input;
      if (t < target.size()) {
        batch.dec_out[t][b] = target[t];
      } else if (t == target.size()) {
        batch.dec_out[t][b] = kEosId;
      } else {
        continue;  // PAD, weight stays 0
      }
      batch.step_weights[t][b] = weights[batch.dec_out[t][b]];
      ++batch.supervised_tokens;
    }
  }
  return batch;
}

}  // namespace

TrainReport train(ModelParams& params, const std::vector<IdPair>& pairs,
                  const LossConfig& loss, const TrainOptions& options,
                  std::ostream* log) {
  if (pairs.empty()) {
    throw ConfigError("training corpus is empty");
  }
  if (options.batch_size < 1 || options.epochs < 1) {
    throw ConfigError("batch size and epochs must be positive");
  }
  const ModelConfig& config = params.config();
  if (loss.weights.size() != static_cast<std::size_t>(config.vocab_size)) {
    throw ConfigError("loss weight vector does not match vocabulary size");
  }

  TrainReport report;
  AdamState adam(params, options.lr);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    auto started = std::chrono::steady_clock::now();
    Rng shuffle_rng(derive_seed(options.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_sum = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      std::size_t end = std::min(order.size(), begin + options.batch_size);
      Batch batch = make_batch(pairs, order, begin, end, loss.weights, config);
      std::size_t n = batch.sources.size();

      Tape tape;
      ParamLeaves leaves = register_params(tape, params);
      EncoderOutput enc = encode(tape, leaves, batch.sources);
      DecoderState state = decoder_start(tape, leaves, enc);

      NodeId per_example = -1;
      for (std::size_t t = 0; t < batch.dec_in.size(); ++t) {
        NodeId logits = decode_step(tape, leaves, state, batch.dec_in[t], &enc);
        NodeId nll = weighted_nll(tape, logits, batch.dec_out[t], batch.step_weights[t]);
        per_example = t == 0 ? nll : ops::add(tape, per_example, nll);
      }
      NodeId total = ops::sum(tape, per_example);
      NodeId objective = ops::scale(tape, total, 1.0 / static_cast<double>(n));
      tape.backward(objective);

      std::vector<Tensor> grads;
      grads.reserve(params.count());
      for (std::size_t i = 0; i < params.count(); ++i) {
        grads.push_back(tape.grad(leaves.ids[i]));
      }
      adam_step(params, grads, adam);

      epoch_sum += tape.value(total)[0];
      epoch_tokens += batch.supervised_tokens;
    }

    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    double mean_loss = epoch_tokens == 0 ? 0.0 : epoch_sum / epoch_tokens;
    report.epoch_loss.push_back(mean_loss);
    report.epoch_seconds.push_back(seconds);
    if (log != nullptr) {
      std::ostringstream line;
      line << "epoch=" << epoch << " loss=" << mean_loss << " seconds=" << seconds;
      (*log) << line.str() << '\n';
    }
  }
  return report;
}

}  // namespace divergen
