#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divergen/tokenfreq.hpp"

namespace divergen {

/// Corpus-level BLEU-n for n in {1, 2}, single reference per hypothesis.
/// Clipped n-gram matches are pooled over the whole corpus; any order whose
/// pooled match count is zero gets 0.1 added to its numerator; the brevity
/// penalty is min(1, exp(1 - r/c)) over total reference/candidate lengths.
/// Returns a percentage.
double corpus_bleu(const std::vector<TokenSequence>& hypotheses,
                   const std::vector<TokenSequence>& references, int n);

/// Percentage of distinct n-grams among all n-grams pooled over the
/// hypotheses. Empty pool gives 0.
double dist_n(const std::vector<TokenSequence>& hypotheses, int n);

double mean_length(const std::vector<TokenSequence>& hypotheses);

/// Percentage of hypotheses containing some token at least twice.
double repetition_rate(const std::vector<TokenSequence>& hypotheses);

struct EvalCounts {
  std::int64_t sentences = 0;
  std::int64_t hyp_tokens = 0;
  std::int64_t ref_tokens = 0;
  std::int64_t unigram_match = 0;
  std::int64_t unigram_total = 0;
  std::int64_t bigram_match = 0;
  std::int64_t bigram_total = 0;
  std::int64_t dist1_distinct = 0;
  std::int64_t dist1_total = 0;
  std::int64_t dist2_distinct = 0;
  std::int64_t dist2_total = 0;
  std::int64_t repeated_sentences = 0;
};

struct EvalReport {
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double dist1 = 0.0;
  double dist2 = 0.0;
  double mean_length = 0.0;
  double repetition_rate = 0.0;
  EvalCounts counts;

  std::string to_json() const;
};

EvalReport evaluate_corpus(const std::vector<TokenSequence>& hypotheses,
                           const std::vector<TokenSequence>& references);

}  // namespace divergen
