#include <cmath>
#include <cstring>
#include <sstream>

#include <doctest.h>

#include "divergen/errors.hpp"
#include "divergen/gradcheck.hpp"
#include "divergen/objectives.hpp"
#include "divergen/rng.hpp"
#include "test_helpers.hpp"

using namespace divergen;
using testutil::random_tensor;

namespace {

Tensor uniform_logits(std::size_t n, double value = 0.0) {
  return Tensor::full({n}, value);
}

// Distinct-token copy pairs over a tiny alphabet.
std::vector<IdPair> copy_pairs(int count, int vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<IdPair> pairs;
  for (int i = 0; i < count; ++i) {
    std::size_t len = 2 + rng.next_below(3);
    IdSequence raw;
    for (std::size_t j = 0; j < len; ++j) {
      raw.push_back(4 + static_cast<int>(rng.next_below(vocab_size - 4)));
    }
    IdPair pair;
    pair.source.push_back(kSosId);
    pair.source.insert(pair.source.end(), raw.begin(), raw.end());
    pair.source.push_back(kEosId);
    pair.target = raw;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace

TEST_SUITE_BEGIN("objectives");

TEST_CASE("sce_loss of uniform logits is ln |V|") {
  for (int target = 0; target < 4; ++target) {
    CHECK(sce_loss(uniform_logits(4), target) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
}

TEST_CASE("sce_loss of a confident one-hot is near zero") {
  Tensor logits({8});
  logits[3] = 30.0;
  CHECK(sce_loss(logits, 3) < 1e-12);
}

TEST_CASE("sce_loss closed-form two-class example") {
  Tensor logits({2}, {1.0, 0.0});
  CHECK(sce_loss(logits, 0) == doctest::Approx(0.313262).epsilon(1e-5));
  CHECK(sce_loss(logits, 0) ==
        doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("sce_loss rejects out-of-range targets") {
  CHECK_THROWS_AS(sce_loss(uniform_logits(4), 4), ContractError);
  CHECK_THROWS_AS(sce_loss(uniform_logits(4), -1), ContractError);
}

TEST_CASE("itf_loss with all-ones weights equals sce_loss") {
  Rng rng(211);
  WeightVector ones = WeightVector::ones(16);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor logits = random_tensor({16}, rng, -8.0, 8.0);
    int target = static_cast<int>(rng.next_below(16));
    CHECK(std::abs(itf_loss(logits, target, ones) - sce_loss(logits, target)) <
          1e-12);
  }
}

TEST_CASE("itf_loss scales linearly in the target weight") {
  WeightVector w = WeightVector::ones(4);
  w.w[2] = 0.5;
  CHECK(itf_loss(uniform_logits(4), 2, w) ==
        doctest::Approx(std::log(4.0) / 2).epsilon(1e-12));
  WeightVector w2 = w;
  w2.w[2] *= 2.0;
  CHECK(itf_loss(uniform_logits(4), 2, w2) ==
        doctest::Approx(2.0 * itf_loss(uniform_logits(4), 2, w)).epsilon(1e-15));
}

TEST_CASE("itf_loss composed with the published weight for freq 1096434") {
  FrequencyTable freq;
  freq.counts = {1096434};
  WeightVector w = compute_weights(freq, 0.4);
  double loss = itf_loss(uniform_logits(4, 1.5), 0, WeightVector{{w[0], 1, 1, 1}, 0.4});
  CHECK(loss == doctest::Approx(0.005324).epsilon(0.005));
}

TEST_CASE("itf_loss is non-increasing in training frequency") {
  Rng rng(223);
  Tensor logits = random_tensor({6}, rng);
  double prev = 1e300;
  for (long count : {1L, 5L, 50L, 5000L}) {
    FrequencyTable freq;
    freq.counts.assign(6, 1);
    freq.counts[2] = count;
    double loss = itf_loss(logits, 2, compute_weights(freq, 0.4));
    CHECK(loss <= prev);
    prev = loss;
  }
}

TEST_CASE("sequence_loss sums non-PAD steps") {
  WeightVector ones = WeightVector::ones(4);
  std::vector<Tensor> logits = {uniform_logits(4), uniform_logits(4)};

  SUBCASE("all PAD gives zero") {
    CHECK(sequence_loss(logits, {0, 0}, ones, {true, true}) == 0.0);
  }
  SUBCASE("single step is ln 4") {
    CHECK(sequence_loss({uniform_logits(4)}, {1}, ones, {false}) ==
          doctest::Approx(std::log(4.0)));
  }
  SUBCASE("two identical steps double the loss") {
    double one = sequence_loss({uniform_logits(4)}, {1}, ones, {false});
    double two = sequence_loss(logits, {1, 1}, ones, {false, false});
    CHECK(two == doctest::Approx(2.0 * one).epsilon(1e-15));
  }
  SUBCASE("length mismatch is a contract error") {
    CHECK_THROWS_AS(sequence_loss(logits, {1}, ones, {false, false}),
                    ContractError);
  }
}

TEST_CASE("weighted_nll gradient matches finite differences for both weightings") {
  Rng rng(227);
  for (bool itf : {false, true}) {
    std::vector<Tensor> params = {random_tensor({3, 7}, rng, -2.0, 2.0)};
    std::vector<int> targets = {1, 6, 3};
    std::vector<double> weights = itf ? std::vector<double>{0.2, 1.0, 0.05}
                                      : std::vector<double>{1.0, 1.0, 1.0};
    ScalarBuilder f = [&](Tape& tape, const std::vector<NodeId>& leaves) {
      return ops::sum(tape, weighted_nll(tape, leaves[0], targets, weights));
    };
    GradCheckReport report = grad_check(f, params, 1e-5, 1e-4);
    CHECK_MESSAGE(report.pass, report.summary());
  }
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  ModelConfig config;
  config.num_layers = 1;
  config.hidden = 4;
  config.embed = 3;
  config.vocab_size = 6;
  ModelParams params(config);
  ModelParams before = params;
  AdamState adam(params, 3e-4);

  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < params.count(); ++i) {
    grads.push_back(Tensor::full(params.tensor(i).shape(), 0.7));
  }
  adam_step(params, grads, adam);
  CHECK(adam.step == 1);
  for (std::size_t i = 0; i < params.count(); ++i) {
    for (std::size_t j = 0; j < params.tensor(i).size(); ++j) {
      double moved = params.tensor(i)[j] - before.tensor(i)[j];
      CHECK(moved == doctest::Approx(-3e-4).epsilon(1e-3));
    }
  }
}

TEST_CASE("adam with zero gradients only advances the step counter") {
  ModelConfig config;
  config.num_layers = 1;
  config.hidden = 3;
  config.embed = 3;
  config.vocab_size = 5;
  ModelParams params = init_params(config, 5);
  ModelParams before = params;
  AdamState adam(params);
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < params.count(); ++i) {
    grads.push_back(Tensor::zeros(params.tensor(i).shape()));
  }
  adam_step(params, grads, adam);
  CHECK(adam.step == 1);
  for (std::size_t i = 0; i < params.count(); ++i) {
    CHECK(std::memcmp(params.tensor(i).data(), before.tensor(i).data(),
                      params.tensor(i).size() * sizeof(double)) == 0);
  }
}

TEST_CASE("two adam steps match the hand recurrence") {
  ModelConfig config;
  config.num_layers = 1;
  config.hidden = 2;
  config.embed = 2;
  config.vocab_size = 5;
  ModelParams params(config);
  double p0 = params.tensor(0)[0];
  AdamState adam(params, 1e-2);

  double g = -1.3;
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < params.count(); ++i) {
    grads.push_back(Tensor::full(params.tensor(i).shape(), g));
  }
  adam_step(params, grads, adam);
  adam_step(params, grads, adam);

  // Independent recomputation of the m/v recurrence.
  double m = 0.0;
  double v = 0.0;
  double p = p0;
  for (int t = 1; t <= 2; ++t) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    double m_hat = m / (1.0 - std::pow(0.9, t));
    double v_hat = v / (1.0 - std::pow(0.999, t));
    p -= 1e-2 * m_hat / (std::sqrt(v_hat) + 1e-8);
  }
  CHECK(params.tensor(0)[0] == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("adam reports the parameter carrying a non-finite gradient") {
  ModelConfig config;
  config.num_layers = 1;
  config.hidden = 2;
  config.embed = 2;
  config.vocab_size = 5;
  ModelParams params(config);
  AdamState adam(params);
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < params.count(); ++i) {
    grads.push_back(Tensor::zeros(params.tensor(i).shape()));
  }
  grads[2][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adam_step(params, grads, adam),
                       doctest::Contains(params.name(2).c_str()), NumericError);
}

TEST_CASE("train is deterministic and starts near the uniform baseline") {
  ModelConfig config = ModelConfig::desk_scale(30);
  config.num_layers = 2;
  config.hidden = 16;
  config.embed = 16;
  std::vector<IdPair> pairs = copy_pairs(12, 30, 999);

  TrainOptions options;
  options.epochs = 3;
  options.batch_size = 4;
  options.seed = 123;

  auto run = [&]() {
    ModelParams params = init_params(config, 123);
    TrainReport report =
        train(params, pairs, LossConfig::sce(30), options, nullptr);
    return std::make_pair(std::move(params), report);
  };
  auto [params1, report1] = run();
  auto [params2, report2] = run();

  CHECK(report1.epoch_loss == report2.epoch_loss);
  bool identical = true;
  for (std::size_t i = 0; i < params1.count(); ++i) {
    identical = identical &&
                std::memcmp(params1.tensor(i).data(), params2.tensor(i).data(),
                            params1.tensor(i).size() * sizeof(double)) == 0;
  }
  CHECK(identical);
  CHECK(report1.epoch_loss[0] ==
        doctest::Approx(std::log(30.0)).epsilon(0.2));
}

TEST_CASE("small copy task overfits") {
  ModelConfig config = ModelConfig::desk_scale(20);
  config.hidden = 32;
  config.embed = 32;
  std::vector<IdPair> pairs = copy_pairs(10, 20, 7);
  ModelParams params = init_params(config, 7);
  TrainOptions options;
  options.epochs = 400;
  options.batch_size = 2;
  options.lr = 1e-3;
  options.seed = 7;
  TrainReport report = train(params, pairs, LossConfig::sce(20), options);
  CHECK(report.final_loss() < 0.05);
}

TEST_CASE("train writes the per-epoch log lines") {
  ModelConfig config = ModelConfig::desk_scale(10);
  config.hidden = 8;
  config.embed = 8;
  std::vector<IdPair> pairs = copy_pairs(4, 10, 3);
  ModelParams params = init_params(config, 3);
  TrainOptions options;
  options.epochs = 2;
  options.batch_size = 2;
  options.seed = 3;
  std::ostringstream log;
  train(params, pairs, LossConfig::sce(10), options, &log);
  CHECK(log.str().find("epoch=1 loss=") != std::string::npos);
  CHECK(log.str().find("epoch=2 loss=") != std::string::npos);
  CHECK(log.str().find("seconds=") != std::string::npos);
}

TEST_CASE("batched attention training handles uneven source lengths") {
  ModelConfig config = ModelConfig::desk_scale(25);
  config.hidden = 12;
  config.embed = 12;
  config.use_attention = true;
  Rng rng(555);
  std::vector<IdPair> pairs;
  for (int i = 0; i < 9; ++i) {
    IdPair pair;
    pair.source.push_back(kSosId);
    for (std::size_t j = 0; j < 1 + rng.next_below(6); ++j) {
      pair.source.push_back(4 + static_cast<int>(rng.next_below(21)));
    }
    pair.source.push_back(kEosId);
    pair.target = {4 + static_cast<int>(rng.next_below(21)),
                   4 + static_cast<int>(rng.next_below(21))};
    pairs.push_back(std::move(pair));
  }
  ModelParams params = init_params(config, 555);
  TrainOptions options;
  options.epochs = 5;
  options.batch_size = 4;
  options.seed = 555;
  TrainReport report = train(params, pairs, LossConfig::sce(25), options);
  for (double loss : report.epoch_loss) {
    CHECK(std::isfinite(loss));
  }
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
}

TEST_CASE("train rejects an empty corpus") {
  ModelConfig config = ModelConfig::desk_scale(10);
  ModelParams params = init_params(config, 1);
  TrainOptions options;
  CHECK_THROWS_AS(train(params, {}, LossConfig::sce(10), options), ConfigError);
}

TEST_SUITE_END();
