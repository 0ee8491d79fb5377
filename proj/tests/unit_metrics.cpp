#include <cmath>

#include <doctest.h>

#include "divergen/errors.hpp"
#include "divergen/metrics.hpp"
#include "divergen/rng.hpp"
#include "reference_metrics.hpp"

using namespace divergen;

namespace {

std::vector<TokenSequence> random_corpus(Rng& rng, std::size_t max_sentences,
                                         std::size_t max_tokens) {
  std::vector<TokenSequence> corpus(1 + rng.next_below(max_sentences));
  for (TokenSequence& sentence : corpus) {
    sentence.resize(rng.next_below(max_tokens + 1));
    for (std::string& token : sentence) {
      token = std::string(1, static_cast<char>('a' + rng.next_below(6)));
    }
  }
  return corpus;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("perfect hypotheses score BLEU 100") {
  std::vector<TokenSequence> h = {{"a", "b"}, {"c"}};
  CHECK(corpus_bleu(h, h, 1) == doctest::Approx(100.0));
  CHECK(corpus_bleu(h, h, 2) == doctest::Approx(100.0));
}

TEST_CASE("half-matching unigram pair scores 50") {
  CHECK(corpus_bleu({{"a", "b"}}, {{"a", "c"}}, 1) == doctest::Approx(50.0));
}

TEST_CASE("hand-computed BLEU-2 example") {
  // p1 = 2/3, p2 = 1/2, BP = 1 -> 100 * sqrt(1/3).
  double b = corpus_bleu({{"a", "b", "c"}}, {{"a", "b", "d"}}, 2);
  CHECK(b == doctest::Approx(100.0 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("bleu rejects bad order and misaligned lists") {
  std::vector<TokenSequence> h = {{"a"}};
  CHECK_THROWS_AS(corpus_bleu(h, h, 3), ContractError);
  CHECK_THROWS_AS(corpus_bleu(h, {}, 1), ContractError);
}

TEST_CASE("dist examples") {
  CHECK(dist_n({{"a", "a", "b"}}, 1) == doctest::Approx(100.0 * 2 / 3));
  CHECK(dist_n({{"a", "b"}, {"a", "b"}}, 1) == doctest::Approx(50.0));
  CHECK(dist_n({{"a", "a", "a"}}, 2) == doctest::Approx(50.0));
  CHECK(dist_n({}, 1) == 0.0);
}

TEST_CASE("mean length examples") {
  CHECK(mean_length({{"a", "b"}}) == doctest::Approx(2.0));
  CHECK(mean_length({{"a"}, {"a", "b", "c"}}) == doctest::Approx(2.0));
  CHECK(mean_length({}) == 0.0);
}

TEST_CASE("repetition rate examples") {
  CHECK(repetition_rate({{"a", "b", "a"}}) == doctest::Approx(100.0));
  CHECK(repetition_rate({{"a", "b"}, {"c", "c"}}) == doctest::Approx(50.0));
  CHECK(repetition_rate({{"a", "b"}, {"c", "d"}}) == 0.0);
  CHECK(repetition_rate({}) == 0.0);
}

TEST_CASE("metrics agree with the brute-force reference on random corpora") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TokenSequence> hyps = random_corpus(rng, 20, 12);
    std::vector<TokenSequence> refs = random_corpus(rng, hyps.size(), 12);
    refs.resize(hyps.size());
    for (int n = 1; n <= 2; ++n) {
      CHECK(std::abs(corpus_bleu(hyps, refs, n) - reference::bleu(hyps, refs, n)) <
            1e-9);
      CHECK(std::abs(dist_n(hyps, n) - reference::dist(hyps, n)) < 1e-9);
    }
  }
}

TEST_CASE("metrics are invariant to corpus permutation") {
  Rng rng(103);
  std::vector<TokenSequence> hyps = random_corpus(rng, 12, 8);
  std::vector<TokenSequence> refs = random_corpus(rng, hyps.size(), 8);
  refs.resize(hyps.size());

  std::vector<std::size_t> perm(hyps.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    perm[i] = i;
  }
  rng.shuffle(perm);
  std::vector<TokenSequence> hyps_p;
  std::vector<TokenSequence> refs_p;
  for (std::size_t i : perm) {
    hyps_p.push_back(hyps[i]);
    refs_p.push_back(refs[i]);
  }
  for (int n = 1; n <= 2; ++n) {
    CHECK(corpus_bleu(hyps, refs, n) == doctest::Approx(corpus_bleu(hyps_p, refs_p, n)));
    CHECK(dist_n(hyps, n) == doctest::Approx(dist_n(hyps_p, n)));
  }
}

TEST_CASE("duplicating a hypothesis never increases dist") {
  Rng rng(107);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<TokenSequence> hyps = random_corpus(rng, 8, 6);
    std::vector<TokenSequence> more = hyps;
    more.push_back(hyps[rng.next_below(hyps.size())]);
    for (int n = 1; n <= 2; ++n) {
      CHECK(dist_n(more, n) <= dist_n(hyps, n) + 1e-12);
    }
  }
}

TEST_CASE("evaluate_corpus keeps counts consistent with percentages") {
  std::vector<TokenSequence> hyps = {{"a", "b", "c"}, {"a", "a"}};
  std::vector<TokenSequence> refs = {{"a", "b", "d"}, {"b", "a"}};
  EvalReport report = evaluate_corpus(hyps, refs);
  CHECK(report.counts.sentences == 2);
  CHECK(report.dist1 ==
        doctest::Approx(100.0 * report.counts.dist1_distinct /
                        report.counts.dist1_total));
  CHECK(report.counts.repeated_sentences == 1);
  CHECK(report.repetition_rate == doctest::Approx(50.0));
  CHECK(report.bleu1 == doctest::Approx(corpus_bleu(hyps, refs, 1)));
  CHECK(report.bleu2 == doctest::Approx(corpus_bleu(hyps, refs, 2)));

  std::string json = report.to_json();
  CHECK(json.find("\"bleu1\"") != std::string::npos);
  CHECK(json.find("\"counts\"") != std::string::npos);
}

TEST_SUITE_END();
