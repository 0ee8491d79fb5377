#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "divergen/tape.hpp"
#include "divergen/tokenfreq.hpp"

namespace divergen {

struct ModelConfig {
  int num_layers = 2;
  int hidden = 64;
  int embed = 64;
  int vocab_size = 0;
  int max_len = 28;
  bool use_attention = false;
  std::uint64_t seed = 0;

  // Full-size configuration: 4 layers, 256 hidden/embedding.
  static ModelConfig full_scale(int vocab_size);
  // Small enough to train in seconds on a laptop core.
  static ModelConfig desk_scale(int vocab_size);

  void validate() const;
};

/// All learnable arrays of the residual LSTM encoder-decoder, in a fixed
/// registration order that the optimizer state and the checkpoint format
/// both rely on.
class ModelParams {
 public:
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::size_t count() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  Tensor& tensor(std::size_t i) { return entries_[i].second; }
  const Tensor& tensor(std::size_t i) const { return entries_[i].second; }
  Tensor& by_name(const std::string& name);
  const Tensor& by_name(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

 private:
  void add(const std::string& name, std::vector<std::size_t> shape);

  ModelConfig config_;
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform init in [-0.08, 0.08] from the "init" stream of `seed`, with LSTM
/// forget-gate biases set to 1.0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Checkpoint: "DIVG1" header, config as decimal text, then named parameter
// blocks with little-endian 64-bit float payloads. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

/// Parameter leaves registered on a tape, aligned with ModelParams order.
struct ParamLeaves {
  const ModelParams* params = nullptr;
  std::vector<NodeId> ids;

  NodeId by_name(const std::string& name) const;
  const ModelConfig& config() const { return params->config(); }
};

ParamLeaves register_params(Tape& tape, const ModelParams& params);

/// Batched encoder result. `states` holds one [B, hidden] node per source
/// position (top layer, residual included); `valid[t][b]` marks whether
/// position t exists in example b.
struct EncoderOutput {
  std::vector<NodeId> states;
  std::vector<std::pair<NodeId, NodeId>> layer_final;  // (h, c) per layer
  std::vector<std::vector<double>> valid;
  int batch = 0;
};

/// Layer 1 is a forward/backward LSTM pair whose per-step states are
/// concatenated and projected back to `hidden`; layers above are
/// unidirectional with residual connections. Sources may have different
/// lengths; each length must be in [1, max_len].
EncoderOutput encode(Tape& tape, const ParamLeaves& leaves,
                     const std::vector<IdSequence>& sources);
EncoderOutput encode(Tape& tape, const ParamLeaves& leaves,
                     const IdSequence& source);

struct DecoderState {
  std::vector<std::pair<NodeId, NodeId>> layer_hc;  // [B, hidden] each
  int step = 0;
  int batch = 1;
};

// Initial decoder state bridged from the encoder finals via learned linear
// maps (layer 1 sees the concatenated forward/backward finals).
DecoderState decoder_start(Tape& tape, const ParamLeaves& leaves,
                           const EncoderOutput& enc);

// All-zero initial state; with enc == nullptr in decode_step this produces
// the anti-language-model logits u of MMI decoding.
DecoderState decoder_start_zero(Tape& tape, const ParamLeaves& leaves, int batch);

/// Embeds the previous tokens, runs the layer stack (residual from layer 2
/// up), optionally adds the attention context to the top-layer output, and
/// returns raw projection logits [B, |V|]. Pass enc == nullptr for the
/// unconditional (anti-LM) stream: no attention, whatever state the caller
/// seeded (decoder_start_zero for Eq-style zero init).
NodeId decode_step(Tape& tape, const ParamLeaves& leaves, DecoderState& state,
                   std::span<const int> prev_tokens, const EncoderOutput* enc);

/// decode_step with no encoder input at all: attention disabled, state seeded
/// by the caller (decoder_start_zero for the MMI anti-LM logits u).
NodeId unconditional_step(Tape& tape, const ParamLeaves& leaves,
                          DecoderState& state, std::span<const int> prev_tokens);

/// Scaled dot-product attention: weights = softmax(q . k_t / sqrt(hidden)),
/// context = weighted sum of the values (= keys). Invalid key positions are
/// masked out of the softmax. Returns the [B, hidden] context.
NodeId attention(Tape& tape, NodeId query, const std::vector<NodeId>& keys,
                 const std::vector<std::vector<double>>& valid);
NodeId attention(Tape& tape, NodeId query, const std::vector<NodeId>& keys);

/// Attention weights only (for inspection/tests); same masking rules.
Tensor attention_weights(const Tensor& query, const std::vector<Tensor>& keys);

}  // namespace divergen
