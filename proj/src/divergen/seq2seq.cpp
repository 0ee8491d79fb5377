#include "divergen/seq2seq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "divergen/errors.hpp"
#include "divergen/ops.hpp"
#include "divergen/rng.hpp"

namespace divergen {

ModelConfig ModelConfig::full_scale(int vocab_size) {
  ModelConfig c;
  c.num_layers = 4;
  c.hidden = 256;
  c.embed = 256;
  c.vocab_size = vocab_size;
  c.max_len = 28;
  return c;
}

ModelConfig ModelConfig::desk_scale(int vocab_size) {
  ModelConfig c;
  c.num_layers = 2;
  c.hidden = 64;
  c.embed = 64;
  c.vocab_size = vocab_size;
  c.max_len = 28;
  return c;
}

void ModelConfig::validate() const {
  if (num_layers < 1 || hidden < 1 || embed < 1 || vocab_size < 5) {
    throw ConfigError("model config sizes must be positive (vocab >= 5)");
  }
  if (max_len < 2) {
    throw ConfigError("max_len must be at least 2");
  }
}

void ModelParams::add(const std::string& name, std::vector<std::size_t> shape) {
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, Tensor::zeros(std::move(shape)));
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::size_t v = static_cast<std::size_t>(config.vocab_size);
  std::size_t h = static_cast<std::size_t>(config.hidden);
  std::size_t e = static_cast<std::size_t>(config.embed);

  add("embedding", {v, e});

  // Encoder layer 1: forward + backward LSTMs over embeddings, merged by a
  // learned projection back to `hidden`.
  add("enc.l0.fwd.wx", {e, 4 * h});
  add("enc.l0.fwd.wh", {h, 4 * h});
  add("enc.l0.fwd.b", {4 * h});
  add("enc.l0.bwd.wx", {e, 4 * h});
  add("enc.l0.bwd.wh", {h, 4 * h});
  add("enc.l0.bwd.b", {4 * h});
  add("enc.merge.w", {2 * h, h});
  add("enc.merge.b", {h});
  for (int l = 1; l < config.num_layers; ++l) {
    std::string p = "enc.l" + std::to_string(l) + ".";
    add(p + "wx", {h, 4 * h});
    add(p + "wh", {h, 4 * h});
    add(p + "b", {4 * h});
  }

  // Per-layer linear bridges from encoder finals to decoder initial state.
  // Layer 1 sees the concatenated forward/backward finals.
  for (int l = 0; l < config.num_layers; ++l) {
    std::size_t in = l == 0 ? 2 * h : h;
    std::string p = "bridge.l" + std::to_string(l) + ".";
    add(p + "h.w", {in, h});
    add(p + "h.b", {h});
    add(p + "c.w", {in, h});
    add(p + "c.b", {h});
  }

  for (int l = 0; l < config.num_layers; ++l) {
    std::string p = "dec.l" + std::to_string(l) + ".";
    add(p + "wx", {l == 0 ? e : h, 4 * h});
    add(p + "wh", {h, 4 * h});
    add(p + "b", {4 * h});
  }

  add("proj.w", {h, v});
  add("proj.b", {v});
}

Tensor& ModelParams::by_name(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ContractError("unknown parameter: " + name);
  }
  return entries_[it->second].second;
}

const Tensor& ModelParams::by_name(const std::string& name) const {
  return const_cast<ModelParams*>(this)->by_name(name);
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams params(config);
  Rng rng(derive_seed(seed, "init"));
  for (std::size_t i = 0; i < params.count(); ++i) {
    Tensor& t = params.tensor(i);
    for (std::size_t j = 0; j < t.size(); ++j) {
      t[j] = rng.next_uniform(-0.08, 0.08);
    }
  }
  // Forget-gate bias 1.0; gate layout is [i f g o].
  std::size_t h = static_cast<std::size_t>(config.hidden);
  for (std::size_t i = 0; i < params.count(); ++i) {
    const std::string& name = params.name(i);
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0 &&
        (name.rfind("enc.l", 0) == 0 || name.rfind("dec.l", 0) == 0)) {
      Tensor& b = params.tensor(i);
      for (std::size_t j = h; j < 2 * h; ++j) {
        b[j] = 1.0;
      }
    }
  }
  return params;
}

ParamLeaves register_params(Tape& tape, const ModelParams& params) {
  ParamLeaves leaves;
  leaves.params = &params;
  leaves.ids.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    leaves.ids.push_back(tape.leaf(params.tensor(i)));
  }
  return leaves;
}

NodeId ParamLeaves::by_name(const std::string& name) const {
  for (std::size_t i = 0; i < params->count(); ++i) {
    if (params->name(i) == name) {
      return ids[i];
    }
  }
  throw ContractError("unknown parameter: " + name);
}

namespace {

struct LstmCellIds {
  NodeId wx;
  NodeId wh;
  NodeId b;
};

LstmCellIds cell_ids(const ParamLeaves& leaves, const std::string& prefix) {
  return {leaves.by_name(prefix + "wx"), leaves.by_name(prefix + "wh"),
          leaves.by_name(prefix + "b")};
}

std::pair<NodeId, NodeId> lstm_cell(Tape& tape, const LstmCellIds& cell,
                                    NodeId x, NodeId h, NodeId c,
                                    std::size_t hidden) {
  NodeId gates = ops::add(
      tape, ops::add(tape, ops::matmul(tape, x, cell.wx), ops::matmul(tape, h, cell.wh)),
      cell.b);
  NodeId in_gate = ops::sigmoid(tape, ops::slice(tape, gates, 0, hidden));
  NodeId forget = ops::sigmoid(tape, ops::slice(tape, gates, hidden, hidden));
  NodeId cand = ops::tanh(tape, ops::slice(tape, gates, 2 * hidden, hidden));
  NodeId out_gate = ops::sigmoid(tape, ops::slice(tape, gates, 3 * hidden, hidden));
  NodeId c_next = ops::add(tape, ops::mul(tape, forget, c), ops::mul(tape, in_gate, cand));
  NodeId h_next = ops::mul(tape, out_gate, ops::tanh(tape, c_next));
  return {h_next, c_next};
}

bool all_valid(const std::vector<double>& mask) {
  return std::all_of(mask.begin(), mask.end(), [](double m) { return m == 1.0; });
}

// Keeps the previous state on examples that already ended:
// mask * fresh + (1 - mask) * held.
NodeId mask_mix(Tape& tape, NodeId fresh, NodeId held,
                const std::vector<double>& mask, std::size_t hidden) {
  std::size_t batch = mask.size();
  Tensor m({batch, hidden});
  Tensor inv({batch, hidden});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < hidden; ++j) {
      m[b * hidden + j] = mask[b];
      inv[b * hidden + j] = 1.0 - mask[b];
    }
  }
  NodeId m_node = tape.constant(std::move(m));
  NodeId inv_node = tape.constant(std::move(inv));
  return ops::add(tape, ops::mul(tape, m_node, fresh), ops::mul(tape, inv_node, held));
}

NodeId zeros_node(Tape& tape, std::size_t batch, std::size_t hidden) {
  return tape.constant(Tensor::zeros({batch, hidden}));
}

// Runs one LSTM over the per-step inputs with end-of-sequence masking and
// collects the (masked) per-step states.
struct LstmRun {
  std::vector<NodeId> states;
  NodeId final_h;
  NodeId final_c;
};

LstmRun run_lstm(Tape& tape, const LstmCellIds& cell,
                 const std::vector<NodeId>& inputs,
                 const std::vector<std::vector<double>>& valid,
                 std::size_t batch, std::size_t hidden) {
  LstmRun run;
  NodeId h = zeros_node(tape, batch, hidden);
  NodeId c = zeros_node(tape, batch, hidden);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto [h_next, c_next] = lstm_cell(tape, cell, inputs[t], h, c, hidden);
    if (all_valid(valid[t])) {
      h = h_next;
      c = c_next;
    } else {
      h = mask_mix(tape, h_next, h, valid[t], hidden);
      c = mask_mix(tape, c_next, c, valid[t], hidden);
    }
    run.states.push_back(h);
  }
  run.final_h = h;
  run.final_c = c;
  return run;
}

// Re-aligns states produced by a run over per-example-reversed inputs back
// to original positions: out[p] row b = in[len_b - 1 - p] row b, zero where
// p is past the end. Linear, so the adjoint is the same scatter transposed.
std::vector<NodeId> realign_reversed(Tape& tape, const std::vector<NodeId>& rev,
                                     const std::vector<int>& lengths,
                                     std::size_t hidden) {
  std::size_t steps = rev.size();
  std::size_t batch = lengths.size();
  std::vector<NodeId> out;
  out.reserve(steps);
  for (std::size_t p = 0; p < steps; ++p) {
    Tensor value({batch, hidden});
    for (std::size_t b = 0; b < batch; ++b) {
      int src = lengths[b] - 1 - static_cast<int>(p);
      if (src < 0) {
        continue;
      }
      const Tensor& from = tape.value(rev[src]);
      for (std::size_t j = 0; j < hidden; ++j) {
        value[b * hidden + j] = from[b * hidden + j];
      }
    }
    out.push_back(tape.make_node(
        std::move(value), rev,
        [rev, lengths, p, hidden](Tape& t, NodeId self) {
          const Tensor& g = t.grad(self);
          for (std::size_t b = 0; b < lengths.size(); ++b) {
            int src = lengths[b] - 1 - static_cast<int>(p);
            if (src < 0 || !t.requires_grad(rev[src])) {
              continue;
            }
            Tensor& gs = t.grad(rev[src]);
            for (std::size_t j = 0; j < hidden; ++j) {
              gs[b * hidden + j] += g[b * hidden + j];
            }
          }
        }));
  }
  return out;
}

std::vector<NodeId> embed_steps(Tape& tape, const ParamLeaves& leaves,
                                const std::vector<std::vector<int>>& step_ids) {
  NodeId table = leaves.by_name("embedding");
  std::vector<NodeId> out;
  out.reserve(step_ids.size());
  for (const std::vector<int>& ids : step_ids) {
    out.push_back(ops::embedding_lookup(tape, table, ids));
  }
  return out;
}

}  // namespace

EncoderOutput encode(Tape& tape, const ParamLeaves& leaves,
                     const std::vector<IdSequence>& sources) {
  const ModelConfig& config = leaves.config();
  if (sources.empty()) {
    throw ContractError("encode: empty batch");
  }
  std::size_t batch = sources.size();
  std::size_t hidden = static_cast<std::size_t>(config.hidden);
  std::vector<int> lengths(batch);
  std::size_t max_steps = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (sources[b].empty()) {
      throw ContractError("encode: source " + std::to_string(b) + " is empty");
    }
    if (sources[b].size() > static_cast<std::size_t>(config.max_len)) {
      throw ContractError("encode: source " + std::to_string(b) +
                          " longer than max_len");
    }
    lengths[b] = static_cast<int>(sources[b].size());
    max_steps = std::max(max_steps, sources[b].size());
  }

  // Padded id columns, forward and per-example-reversed.
  std::vector<std::vector<int>> fwd_ids(max_steps, std::vector<int>(batch, kPadId));
  std::vector<std::vector<int>> rev_ids(max_steps, std::vector<int>(batch, kPadId));
  std::vector<std::vector<double>> valid(max_steps, std::vector<double>(batch, 0.0));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < sources[b].size(); ++t) {
      fwd_ids[t][b] = sources[b][t];
      rev_ids[t][b] = sources[b][sources[b].size() - 1 - t];
      valid[t][b] = 1.0;
    }
  }

  std::vector<NodeId> fwd_emb = embed_steps(tape, leaves, fwd_ids);
  std::vector<NodeId> rev_emb = embed_steps(tape, leaves, rev_ids);

  LstmRun fwd = run_lstm(tape, cell_ids(leaves, "enc.l0.fwd."), fwd_emb, valid,
                         batch, hidden);
  LstmRun bwd = run_lstm(tape, cell_ids(leaves, "enc.l0.bwd."), rev_emb, valid,
                         batch, hidden);
  std::vector<NodeId> bwd_states = realign_reversed(tape, bwd.states, lengths, hidden);

  NodeId merge_w = leaves.by_name("enc.merge.w");
  NodeId merge_b = leaves.by_name("enc.merge.b");
  std::vector<NodeId> layer_in;
  layer_in.reserve(max_steps);
  for (std::size_t t = 0; t < max_steps; ++t) {
    NodeId both = ops::concat(tape, fwd.states[t], bwd_states[t]);
    layer_in.push_back(ops::add(tape, ops::matmul(tape, both, merge_w), merge_b));
  }

  EncoderOutput out;
  out.batch = static_cast<int>(batch);
  out.valid = valid;
  out.layer_final.emplace_back(ops::concat(tape, fwd.final_h, bwd.final_h),
                               ops::concat(tape, fwd.final_c, bwd.final_c));

  for (int l = 1; l < config.num_layers; ++l) {
    LstmRun run = run_lstm(tape, cell_ids(leaves, "enc.l" + std::to_string(l) + "."),
                           layer_in, valid, batch, hidden);
    std::vector<NodeId> with_residual;
    with_residual.reserve(max_steps);
    for (std::size_t t = 0; t < max_steps; ++t) {
      with_residual.push_back(ops::add(tape, run.states[t], layer_in[t]));
    }
    layer_in = std::move(with_residual);
    out.layer_final.emplace_back(run.final_h, run.final_c);
  }
  out.states = std::move(layer_in);
  return out;
}

EncoderOutput encode(Tape& tape, const ParamLeaves& leaves, const IdSequence& source) {
  return encode(tape, leaves, std::vector<IdSequence>{source});
}

DecoderState decoder_start(Tape& tape, const ParamLeaves& leaves,
                           const EncoderOutput& enc) {
  const ModelConfig& config = leaves.config();
  DecoderState state;
  state.batch = enc.batch;
  for (int l = 0; l < config.num_layers; ++l) {
    std::string p = "bridge.l" + std::to_string(l) + ".";
    NodeId h = ops::add(tape,
                        ops::matmul(tape, enc.layer_final[l].first, leaves.by_name(p + "h.w")),
                        leaves.by_name(p + "h.b"));
    NodeId c = ops::add(tape,
                        ops::matmul(tape, enc.layer_final[l].second, leaves.by_name(p + "c.w")),
                        leaves.by_name(p + "c.b"));
    state.layer_hc.emplace_back(h, c);
  }
  return state;
}

DecoderState decoder_start_zero(Tape& tape, const ParamLeaves& leaves, int batch) {
  const ModelConfig& config = leaves.config();
  DecoderState state;
  state.batch = batch;
  std::size_t hidden = static_cast<std::size_t>(config.hidden);
  for (int l = 0; l < config.num_layers; ++l) {
    state.layer_hc.emplace_back(zeros_node(tape, batch, hidden),
                                zeros_node(tape, batch, hidden));
  }
  return state;
}

NodeId decode_step(Tape& tape, const ParamLeaves& leaves, DecoderState& state,
                   std::span<const int> prev_tokens, const EncoderOutput* enc) {
  const ModelConfig& config = leaves.config();
  if (state.step >= config.max_len) {
    throw ContractError("decode_step past max_len");
  }
  if (prev_tokens.size() != static_cast<std::size_t>(state.batch)) {
    throw ContractError("decode_step: previous-token count does not match batch");
  }
  std::size_t hidden = static_cast<std::size_t>(config.hidden);

  std::vector<int> ids(prev_tokens.begin(), prev_tokens.end());
  NodeId x = ops::embedding_lookup(tape, leaves.by_name("embedding"), ids);

  NodeId layer_in = x;
  for (int l = 0; l < config.num_layers; ++l) {
    LstmCellIds cell = cell_ids(leaves, "dec.l" + std::to_string(l) + ".");
    auto [h, c] = lstm_cell(tape, cell, layer_in, state.layer_hc[l].first,
                            state.layer_hc[l].second, hidden);
    state.layer_hc[l] = {h, c};
    layer_in = l == 0 ? h : ops::add(tape, h, layer_in);
  }

  if (config.use_attention && enc != nullptr) {
    NodeId context = attention(tape, layer_in, enc->states, enc->valid);
    layer_in = ops::add(tape, layer_in, context);
  }

  NodeId logits = ops::add(tape, ops::matmul(tape, layer_in, leaves.by_name("proj.w")),
                           leaves.by_name("proj.b"));
  ++state.step;
  return logits;
}

NodeId unconditional_step(Tape& tape, const ParamLeaves& leaves,
                          DecoderState& state, std::span<const int> prev_tokens) {
  return decode_step(tape, leaves, state, prev_tokens, nullptr);
}

namespace {

// Shared forward math for the fused attention op and the weights probe.
void attention_forward(const Tensor& query, const std::vector<const Tensor*>& keys,
                       const std::vector<std::vector<double>>& valid,
                       Tensor* weights_out, Tensor* context_out) {
  std::size_t batch = query.rows();
  std::size_t hidden = query.cols();
  std::size_t steps = keys.size();
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hidden));

  Tensor scores({batch, steps});
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor& k = *keys[t];
    for (std::size_t b = 0; b < batch; ++b) {
      bool masked = !valid.empty() && valid[t][b] == 0.0;
      if (masked) {
        scores[b * steps + t] = -1e30;
        continue;
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < hidden; ++j) {
        dot += query[b * hidden + j] * k[b * hidden + j];
      }
      scores[b * steps + t] = dot * inv_sqrt;
    }
  }

  Tensor weights({batch, steps});
  for (std::size_t b = 0; b < batch; ++b) {
    double mx = scores[b * steps];
    for (std::size_t t = 1; t < steps; ++t) {
      mx = std::max(mx, scores[b * steps + t]);
    }
    double z = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      weights[b * steps + t] = std::exp(scores[b * steps + t] - mx);
      z += weights[b * steps + t];
    }
    for (std::size_t t = 0; t < steps; ++t) {
      weights[b * steps + t] /= z;
    }
  }
  if (context_out != nullptr) {
    Tensor context({batch, hidden});
    for (std::size_t t = 0; t < steps; ++t) {
      const Tensor& k = *keys[t];
      for (std::size_t b = 0; b < batch; ++b) {
        double w = weights[b * steps + t];
        for (std::size_t j = 0; j < hidden; ++j) {
          context[b * hidden + j] += w * k[b * hidden + j];
        }
      }
    }
    *context_out = std::move(context);
  }
  if (weights_out != nullptr) {
    *weights_out = std::move(weights);
  }
}

}  // namespace

NodeId attention(Tape& tape, NodeId query, const std::vector<NodeId>& keys,
                 const std::vector<std::vector<double>>& valid) {
  if (keys.empty()) {
    throw ContractError("attention requires at least one key");
  }
  std::vector<const Tensor*> key_values;
  key_values.reserve(keys.size());
  for (NodeId k : keys) {
    key_values.push_back(&tape.value(k));
  }
  Tensor weights;
  Tensor context;
  attention_forward(tape.value(query), key_values, valid, &weights, &context);

  std::vector<NodeId> inputs = keys;
  inputs.push_back(query);
  std::size_t hidden = tape.value(query).cols();
  std::size_t batch = tape.value(query).rows();
  std::size_t steps = keys.size();
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hidden));

  return tape.make_node(
      std::move(context), std::move(inputs),
      [query, keys, weights = std::move(weights), hidden, batch, steps,
       inv_sqrt](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);  // [batch, hidden]
        const Tensor& q = t.value(query);

        // d(weights): dw[b,t] = g[b,:] . k_t[b,:]
        Tensor dw({batch, steps});
        for (std::size_t s = 0; s < steps; ++s) {
          const Tensor& k = t.value(keys[s]);
          for (std::size_t b = 0; b < batch; ++b) {
            double dot = 0.0;
            for (std::size_t j = 0; j < hidden; ++j) {
              dot += g[b * hidden + j] * k[b * hidden + j];
            }
            dw[b * steps + s] = dot;
          }
        }
        // Softmax adjoint: ds[b,t] = w[b,t] * (dw[b,t] - sum_u w[b,u] dw[b,u]).
        Tensor ds({batch, steps});
        for (std::size_t b = 0; b < batch; ++b) {
          double mix = 0.0;
          for (std::size_t s = 0; s < steps; ++s) {
            mix += weights[b * steps + s] * dw[b * steps + s];
          }
          for (std::size_t s = 0; s < steps; ++s) {
            ds[b * steps + s] =
                weights[b * steps + s] * (dw[b * steps + s] - mix);
          }
        }
        if (t.requires_grad(query)) {
          Tensor dq({batch, hidden});
          for (std::size_t s = 0; s < steps; ++s) {
            const Tensor& k = t.value(keys[s]);
            for (std::size_t b = 0; b < batch; ++b) {
              double coef = ds[b * steps + s] * inv_sqrt;
              for (std::size_t j = 0; j < hidden; ++j) {
                dq[b * hidden + j] += coef * k[b * hidden + j];
              }
            }
          }
          t.accumulate_grad(query, dq);
        }
        // Keys serve as both keys and values.
        for (std::size_t s = 0; s < steps; ++s) {
          if (!t.requires_grad(keys[s])) {
            continue;
          }
          Tensor dk({batch, hidden});
          for (std::size_t b = 0; b < batch; ++b) {
            double w = weights[b * steps + s];
            double coef = ds[b * steps + s] * inv_sqrt;
            for (std::size_t j = 0; j < hidden; ++j) {
              dk[b * hidden + j] = w * g[b * hidden + j] + coef * q[b * hidden + j];
            }
          }
          t.accumulate_grad(keys[s], dk);
        }
      });
}

NodeId attention(Tape& tape, NodeId query, const std::vector<NodeId>& keys) {
  return attention(tape, query, keys, {});
}

Tensor attention_weights(const Tensor& query, const std::vector<Tensor>& keys) {
  if (keys.empty()) {
    throw ContractError("attention requires at least one key");
  }
  std::vector<const Tensor*> key_ptrs;
  key_ptrs.reserve(keys.size());
  for (const Tensor& k : keys) {
    key_ptrs.push_back(&k);
  }
  Tensor weights;
  attention_forward(query, key_ptrs, {}, &weights, nullptr);
  return weights;
}

namespace {

void write_f64_le(std::ostream& out, double d) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  out.write(bytes, 8);
}

double read_f64_le(std::istream& in) {
  char bytes[8];
  in.read(bytes, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open checkpoint for writing: " + path);
  }
  const ModelConfig& c = params.config();
  out << "DIVG1\n";
  out << c.num_layers << ' ' << c.hidden << ' ' << c.embed << ' ' << c.vocab_size
      << ' ' << c.max_len << ' ' << (c.use_attention ? 1 : 0) << ' ' << c.seed
      << '\n';
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Tensor& t = params.tensor(i);
    out << params.name(i) << '\n';
    out << t.rank();
    for (std::size_t d : t.shape()) {
      out << ' ' << d;
    }
    out << '\n';
    for (std::size_t j = 0; j < t.size(); ++j) {
      write_f64_le(out, t[j]);
    }
  }
  if (!out) {
    throw IoError("failed writing checkpoint: " + path);
  }
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path);
  }
  std::string magic;
  if (!std::getline(in, magic) || magic != "DIVG1") {
    throw FormatError("not a divergen checkpoint: " + path);
  }
  std::string config_line;
  if (!std::getline(in, config_line)) {
    throw FormatError("checkpoint missing config line: " + path);
  }
  ModelConfig config;
  int attention_flag = 0;
  {
    std::istringstream cs(config_line);
    if (!(cs >> config.num_layers >> config.hidden >> config.embed >>
          config.vocab_size >> config.max_len >> attention_flag >> config.seed)) {
      throw FormatError("malformed checkpoint config line: " + path);
    }
    config.use_attention = attention_flag != 0;
  }
  ModelParams params(config);
  std::size_t loaded = 0;
  std::string name;
  while (std::getline(in, name)) {
    if (name.empty()) {
      continue;
    }
    std::string dims_line;
    if (!std::getline(in, dims_line)) {
      throw FormatError("checkpoint block missing dims: " + name);
    }
    std::istringstream ds(dims_line);
    std::size_t rank = 0;
    ds >> rank;
    std::vector<std::size_t> shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
      if (!(ds >> shape[i])) {
        throw FormatError("checkpoint block has malformed dims: " + name);
      }
    }
    if (!params.has(name)) {
      throw FormatError("checkpoint has unknown parameter: " + name);
    }
    Tensor& target = params.by_name(name);
    if (target.shape() != shape) {
      throw FormatError("checkpoint shape mismatch for " + name);
    }
    for (std::size_t j = 0; j < target.size(); ++j) {
      target[j] = read_f64_le(in);
    }
    if (!in) {
      throw FormatError("checkpoint payload truncated in " + name);
    }
    ++loaded;
  }
  if (loaded != params.count()) {
    throw FormatError("checkpoint is missing parameters (" + std::to_string(loaded) +
                      " of " + std::to_string(params.count()) + "): " + path);
  }
  return params;
}

}  // namespace divergen
