#pragma once

// Naive reference implementations of the evaluation metrics, kept
// deliberately independent of src/divergen/metrics.cpp: n-grams are stored
// as token vectors in ordered maps and every pair is recounted from scratch.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace reference {

using Sentence = std::vector<std::string>;
using Ngram = std::vector<std::string>;

inline std::map<Ngram, long> ngram_counts(const Sentence& s, int n) {
  std::map<Ngram, long> counts;
  if (s.size() < static_cast<std::size_t>(n)) {
    return counts;
  }
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    Ngram g(s.begin() + i, s.begin() + i + n);
    ++counts[g];
  }
  return counts;
}

inline double bleu(const std::vector<Sentence>& hyps,
                   const std::vector<Sentence>& refs, int n) {
  long hyp_len = 0;
  long ref_len = 0;
  std::vector<long> match(n, 0);
  std::vector<long> total(n, 0);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += static_cast<long>(hyps[i].size());
    ref_len += static_cast<long>(refs[i].size());
    for (int k = 1; k <= n; ++k) {
      std::map<Ngram, long> h = ngram_counts(hyps[i], k);
      std::map<Ngram, long> r = ngram_counts(refs[i], k);
      for (const auto& [gram, count] : h) {
        total[k - 1] += count;
        auto it = r.find(gram);
        if (it != r.end()) {
          match[k - 1] += std::min(count, it->second);
        }
      }
    }
  }
  if (hyp_len == 0) {
    return 0.0;
  }
  double log_p = 0.0;
  for (int k = 0; k < n; ++k) {
    if (total[k] == 0) {
      return 0.0;
    }
    double numer = static_cast<double>(match[k]) + (match[k] == 0 ? 0.1 : 0.0);
    log_p += std::log(numer / static_cast<double>(total[k]));
  }
  double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(hyp_len)));
  return bp * std::exp(log_p / n) * 100.0;
}

inline double dist(const std::vector<Sentence>& hyps, int n) {
  std::map<Ngram, long> pooled;
  long total = 0;
  for (const Sentence& hyp : hyps) {
    for (const auto& [gram, count] : ngram_counts(hyp, n)) {
      pooled[gram] += count;
      total += count;
    }
  }
  if (total == 0) {
    return 0.0;
  }
  return 100.0 * static_cast<double>(pooled.size()) / static_cast<double>(total);
}

}  // namespace reference
