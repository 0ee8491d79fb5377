#include "divergen/decoding.hpp"

#include <cmath>

#include "divergen/errors.hpp"
#include "divergen/tape.hpp"

namespace divergen {

Strategy parse_strategy(const std::string& name) {
  if (name == "greedy") return Strategy::GREEDY;
  if (name == "mmi") return Strategy::MMI;
  if (name == "itf-infer") return Strategy::ITF_INFER;
  if (name == "noisy") return Strategy::NOISY;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected greedy|mmi|itf-infer|noisy)");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::GREEDY: return "greedy";
    case Strategy::MMI: return "mmi";
    case Strategy::ITF_INFER: return "itf-infer";
    case Strategy::NOISY: return "noisy";
  }
  return "?";
}

Tensor mmi_adjust(const Tensor& x, const Tensor& u, double lambda, int step,
                  int gamma) {
  if (!x.same_shape(u)) {
    throw ContractError("mmi_adjust: logits shapes differ, " + x.shape_str() +
                        " vs " + u.shape_str());
  }
  if (step >= gamma) {
    return x;
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] -= lambda * u[i];
  }
  return out;
}

Tensor itf_infer_adjust(const Tensor& x, const WeightVector& weights) {
  if (weights.size() != x.size()) {
    throw ContractError("itf_infer_adjust: weight vector size " +
                        std::to_string(weights.size()) +
                        " does not match logits " + x.shape_str());
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] *= weights[i];
  }
  return out;
}

Tensor noisy_adjust(const Tensor& x, double lambda, Rng& rng) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += lambda * rng.next_gauss();
  }
  return out;
}

Tensor suppress_repetition(const Tensor& x, const RepetitionCounter& counter,
                           double lambda) {
  if (lambda < 0.0) {
    throw ConfigError("suppressor lambda must be nonnegative");
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    int c = counter.count(static_cast<int>(i));
    if (c != 0) {
      out[i] /= std::pow(1.0 + static_cast<double>(c), lambda);
    }
  }
  return out;
}

int argmax_token(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) {
      best = i;
    }
  }
  return static_cast<int>(best);
}

std::vector<int> decode_loop(const LogitsFn& conditional, const LogitsFn* anti_lm,
                             const DecodeConfig& config, const WeightVector* weights,
                             int vocab_size, Rng* noise_rng) {
  if (config.strategy == Strategy::ITF_INFER && weights == nullptr) {
    throw ContractError("ITF inference requires a weight vector");
  }
  if (config.strategy == Strategy::MMI && anti_lm == nullptr) {
    throw ContractError("MMI inference requires an anti-LM logits source");
  }
  RepetitionCounter counter(vocab_size);
  std::vector<int> emitted;
  int prev = kSosId;
  for (int step = 0; step < config.max_len; ++step) {
    Tensor x = conditional(step, prev);
    switch (config.strategy) {
      case Strategy::GREEDY:
        break;
      case Strategy::MMI:
        if (step < config.gamma) {
          x = mmi_adjust(x, (*anti_lm)(step, prev), config.lambda_mmi, step,
                         config.gamma);
        }
        break;
      case Strategy::ITF_INFER:
        x = itf_infer_adjust(x, *weights);
        break;
      case Strategy::NOISY: {
        if (noise_rng == nullptr) {
          throw ContractError("noisy inference requires a seeded generator");
        }
        x = noisy_adjust(x, config.lambda_noise, *noise_rng);
        break;
      }
    }
    x = suppress_repetition(x, counter, config.lambda_suppress);
    int token = argmax_token(x);
    if (token == kEosId) {
      break;
    }
    emitted.push_back(token);
    counter.record(token);
    prev = token;
  }
  return emitted;
}

namespace {

std::vector<int> strip_decode_output(const std::vector<int>& raw) {
  std::vector<int> out;
  out.reserve(raw.size());
  for (int id : raw) {
    if (id == kSosId || id == kEosId || id == kPadId) {
      continue;
    }
    out.push_back(id);
  }
  return out;
}

std::vector<int> decode_one(const ModelParams& params, const IdSequence& source,
                            const DecodeConfig& config, const WeightVector* weights,
                            Rng* noise_rng) {
  if (params.config().vocab_size < 5) {
    throw ContractError("greedy_decode: model has no usable vocabulary");
  }
  Tape tape;
  ParamLeaves leaves = register_params(tape, params);
  EncoderOutput enc = encode(tape, leaves, source);
  DecoderState state = decoder_start(tape, leaves, enc);

  LogitsFn conditional = [&](int /*step*/, int prev) {
    std::vector<int> prev_ids{prev};
    NodeId logits = decode_step(tape, leaves, state, prev_ids, &enc);
    return tape.value(logits);
  };

  std::optional<DecoderState> anti_state;
  LogitsFn anti_lm_fn;
  const LogitsFn* anti_lm = nullptr;
  if (config.strategy == Strategy::MMI) {
    anti_state = decoder_start_zero(tape, leaves, 1);
    anti_lm_fn = [&](int /*step*/, int prev) {
      std::vector<int> prev_ids{prev};
      NodeId u = unconditional_step(tape, leaves, *anti_state, prev_ids);
      return tape.value(u);
    };
    anti_lm = &anti_lm_fn;
  }

  DecodeConfig effective = config;
  effective.max_len = std::min(config.max_len, params.config().max_len);
  std::vector<int> raw = decode_loop(conditional, anti_lm, effective, weights,
                                     params.config().vocab_size, noise_rng);
  return strip_decode_output(raw);
}

}  // namespace

std::vector<int> greedy_decode(const ModelParams& params, const IdSequence& source,
                               const DecodeConfig& config,
                               const WeightVector* weights) {
  Rng noise(derive_seed(config.seed, "noise", 0));
  return decode_one(params, source, config, weights, &noise);
}

std::vector<std::vector<int>> batch_generate(const ModelParams& params,
                                             const std::vector<IdSequence>& sources,
                                             const DecodeConfig& config,
                                             const WeightVector* weights) {
  std::vector<std::vector<int>> out;
  out.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Rng noise(derive_seed(config.seed, "noise", i));
    try {
      out.push_back(decode_one(params, sources[i], config, weights, &noise));
    } catch (const std::exception& e) {
      throw ContractError("batch_generate: source " + std::to_string(i) + ": " +
                          e.what());
    }
  }
  return out;
}

}  // namespace divergen
