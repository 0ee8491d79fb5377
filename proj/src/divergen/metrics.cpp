#include "divergen/metrics.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "divergen/errors.hpp"

namespace divergen {

namespace {

// Tokens never contain whitespace, so a space-joined key is collision-free.
std::string ngram_key(const TokenSequence& s, std::size_t start, int n) {
  std::string key = s[start];
  for (int k = 1; k < n; ++k) {
    key += ' ';
    key += s[start + k];
  }
  return key;
}

void check_order(int n) {
  if (n != 1 && n != 2) {
    throw ContractError("BLEU/DIST order must be 1 or 2, got " + std::to_string(n));
  }
}

struct OrderTally {
  std::int64_t match = 0;
  std::int64_t total = 0;
};

// Clipped n-gram matches for one (hypothesis, reference) pair.
OrderTally tally_order(const TokenSequence& hyp, const TokenSequence& ref, int n) {
  OrderTally t;
  if (hyp.size() < static_cast<std::size_t>(n)) {
    return t;
  }
  std::unordered_map<std::string, std::int64_t> ref_counts;
  if (ref.size() >= static_cast<std::size_t>(n)) {
    for (std::size_t i = 0; i + n <= ref.size(); ++i) {
      ++ref_counts[ngram_key(ref, i, n)];
    }
  }
  std::unordered_map<std::string, std::int64_t> hyp_counts;
  for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
    ++hyp_counts[ngram_key(hyp, i, n)];
    ++t.total;
  }
  for (const auto& [key, count] : hyp_counts) {
    auto it = ref_counts.find(key);
    if (it != ref_counts.end()) {
      t.match += std::min(count, it->second);
    }
  }
  return t;
}

double bleu_from_tallies(const std::vector<OrderTally>& orders, std::int64_t hyp_len,
                         std::int64_t ref_len) {
  if (hyp_len == 0) {
    return 0.0;
  }
  double log_precision = 0.0;
  for (const OrderTally& t : orders) {
    if (t.total == 0) {
      return 0.0;
    }
    double numer = static_cast<double>(t.match) + (t.match == 0 ? 0.1 : 0.0);
    log_precision += std::log(numer / static_cast<double>(t.total));
  }
  double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(hyp_len)));
  return bp * std::exp(log_precision / static_cast<double>(orders.size())) * 100.0;
}

struct DistTally {
  std::int64_t distinct = 0;
  std::int64_t total = 0;
};

DistTally tally_dist(const std::vector<TokenSequence>& hypotheses, int n) {
  DistTally t;
  std::unordered_set<std::string> seen;
  for (const TokenSequence& hyp : hypotheses) {
    if (hyp.size() < static_cast<std::size_t>(n)) {
      continue;
    }
    for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
      seen.insert(ngram_key(hyp, i, n));
      ++t.total;
    }
  }
  t.distinct = static_cast<std::int64_t>(seen.size());
  return t;
}

bool has_repeated_token(const TokenSequence& hyp) {
  std::unordered_set<std::string> seen;
  for (const std::string& tok : hyp) {
    if (!seen.insert(tok).second) {
      return true;
    }
  }
  return false;
}

}  // namespace

double corpus_bleu(const std::vector<TokenSequence>& hypotheses,
                   const std::vector<TokenSequence>& references, int n) {
  check_order(n);
  if (hypotheses.size() != references.size()) {
    throw ContractError("corpus_bleu: " + std::to_string(hypotheses.size()) +
                        " hypotheses vs " + std::to_string(references.size()) +
                        " references");
  }
  std::vector<OrderTally> orders(n);
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += static_cast<std::int64_t>(hypotheses[i].size());
    ref_len += static_cast<std::int64_t>(references[i].size());
    for (int k = 1; k <= n; ++k) {
      OrderTally t = tally_order(hypotheses[i], references[i], k);
      orders[k - 1].match += t.match;
      orders[k - 1].total += t.total;
    }
  }
  return bleu_from_tallies(orders, hyp_len, ref_len);
}

double dist_n(const std::vector<TokenSequence>& hypotheses, int n) {
  check_order(n);
  DistTally t = tally_dist(hypotheses, n);
  if (t.total == 0) {
    return 0.0;
  }
  return 100.0 * static_cast<double>(t.distinct) / static_cast<double>(t.total);
}

double mean_length(const std::vector<TokenSequence>& hypotheses) {
  if (hypotheses.empty()) {
    return 0.0;
  }
  std::int64_t total = 0;
  for (const TokenSequence& hyp : hypotheses) {
    total += static_cast<std::int64_t>(hyp.size());
  }
  return static_cast<double>(total) / static_cast<double>(hypotheses.size());
}

double repetition_rate(const std::vector<TokenSequence>& hypotheses) {
  if (hypotheses.empty()) {
    return 0.0;
  }
  std::int64_t repeated = 0;
  for (const TokenSequence& hyp : hypotheses) {
    if (has_repeated_token(hyp)) {
      ++repeated;
    }
  }
  return 100.0 * static_cast<double>(repeated) /
         static_cast<double>(hypotheses.size());
}

EvalReport evaluate_corpus(const std::vector<TokenSequence>& hypotheses,
                           const std::vector<TokenSequence>& references) {
  if (hypotheses.size() != references.size()) {
    throw ContractError("evaluate_corpus: aligned hypothesis/reference lists required");
  }
  EvalReport report;
  EvalCounts& c = report.counts;
  c.sentences = static_cast<std::int64_t>(hypotheses.size());

  std::vector<OrderTally> orders(2);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    c.hyp_tokens += static_cast<std::int64_t>(hypotheses[i].size());
    c.ref_tokens += static_cast<std::int64_t>(references[i].size());
    for (int k = 1; k <= 2; ++k) {
      OrderTally t = tally_order(hypotheses[i], references[i], k);
      orders[k - 1].match += t.match;
      orders[k - 1].total += t.total;
    }
    if (has_repeated_token(hypotheses[i])) {
      ++c.repeated_sentences;
    }
  }
  c.unigram_match = orders[0].match;
  c.unigram_total = orders[0].total;
  c.bigram_match = orders[1].match;
  c.bigram_total = orders[1].total;

  DistTally d1 = tally_dist(hypotheses, 1);
  DistTally d2 = tally_dist(hypotheses, 2);
  c.dist1_distinct = d1.distinct;
  c.dist1_total = d1.total;
  c.dist2_distinct = d2.distinct;
  c.dist2_total = d2.total;

  report.bleu1 = bleu_from_tallies({orders[0]}, c.hyp_tokens, c.ref_tokens);
  report.bleu2 = bleu_from_tallies(orders, c.hyp_tokens, c.ref_tokens);
  report.dist1 = d1.total == 0 ? 0.0
                               : 100.0 * static_cast<double>(d1.distinct) /
                                     static_cast<double>(d1.total);
  report.dist2 = d2.total == 0 ? 0.0
                               : 100.0 * static_cast<double>(d2.distinct) /
                                     static_cast<double>(d2.total);
  report.mean_length = mean_length(hypotheses);
  report.repetition_rate = repetition_rate(hypotheses);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["bleu1"] = bleu1;
  j["bleu2"] = bleu2;
  j["dist1"] = dist1;
  j["dist2"] = dist2;
  j["mean_length"] = mean_length;
  j["repetition_rate"] = repetition_rate;
  nlohmann::ordered_json jc;
  jc["sentences"] = counts.sentences;
  jc["hyp_tokens"] = counts.hyp_tokens;
  jc["ref_tokens"] = counts.ref_tokens;
  jc["unigram_match"] = counts.unigram_match;
  jc["unigram_total"] = counts.unigram_total;
  jc["bigram_match"] = counts.bigram_match;
  jc["bigram_total"] = counts.bigram_total;
  jc["dist1_distinct"] = counts.dist1_distinct;
  jc["dist1_total"] = counts.dist1_total;
  jc["dist2_distinct"] = counts.dist2_distinct;
  jc["dist2_total"] = counts.dist2_total;
  jc["repeated_sentences"] = counts.repeated_sentences;
  j["counts"] = jc;
  return j.dump(2);
}

}  // namespace divergen
