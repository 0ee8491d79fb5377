#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "divergen/rng.hpp"
#include "divergen/seq2seq.hpp"
#include "divergen/tokenfreq.hpp"

namespace divergen {

enum class Strategy { GREEDY, MMI, ITF_INFER, NOISY };

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

struct DecodeConfig {
  Strategy strategy = Strategy::GREEDY;
  double lambda_mmi = 0.8;      // anti-LM strength
  int gamma = 5;                // anti-LM applies to the first gamma steps
  double lambda_itf_infer = 0.09;
  double lambda_noise = 1.4;
  double lambda_suppress = 1.0;
  int max_len = 28;
  std::uint64_t seed = 0;
};

/// Times each token was emitted so far in the current decode.
class RepetitionCounter {
 public:
  explicit RepetitionCounter(int vocab_size) : counts_(vocab_size, 0) {}

  void record(int id) { ++counts_[id]; }
  int count(int id) const { return counts_[id]; }
  int size() const { return static_cast<int>(counts_.size()); }

 private:
  std::vector<int> counts_;
};

/// x - lambda * u while step < gamma, x unchanged afterwards.
Tensor mmi_adjust(const Tensor& x, const Tensor& u, double lambda, int step,
                  int gamma);

/// Elementwise product w (.) x.
Tensor itf_infer_adjust(const Tensor& x, const WeightVector& weights);

/// x + lambda * n with i.i.d. standard-normal n.
Tensor noisy_adjust(const Tensor& x, double lambda, Rng& rng);

/// x_k / (1 + count_k)^lambda. Negative logits move toward zero, faithful to
/// the defining formula.
Tensor suppress_repetition(const Tensor& x, const RepetitionCounter& counter,
                           double lambda);

// Smallest index wins ties.
int argmax_token(const Tensor& logits);

/// One conditional (and optional anti-LM) logits producer per step; lets the
/// decode loop run against synthetic logit sources in tests.
using LogitsFn = std::function<Tensor(int step, int prev_token)>;

/// Greedy loop: strategy adjustment, then repetition suppression, then
/// argmax; stops at EOS or max_len. Returns emitted ids, EOS excluded.
std::vector<int> decode_loop(const LogitsFn& conditional, const LogitsFn* anti_lm,
                             const DecodeConfig& config, const WeightVector* weights,
                             int vocab_size, Rng* noise_rng);

/// Full greedy decode of one source. `weights` is required exactly when the
/// strategy is ITF_INFER. The returned ids carry no SOS/EOS/PAD.
std::vector<int> greedy_decode(const ModelParams& params, const IdSequence& source,
                               const DecodeConfig& config,
                               const WeightVector* weights = nullptr);

/// Independent decodes with per-source noise streams derived from
/// (seed, index), so outputs do not depend on batch order.
std::vector<std::vector<int>> batch_generate(const ModelParams& params,
                                             const std::vector<IdSequence>& sources,
                                             const DecodeConfig& config,
                                             const WeightVector* weights = nullptr);

}  // namespace divergen
