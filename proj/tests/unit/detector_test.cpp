#include <gtest/gtest.h>

#include <cmath>

#include "maga/arena.hpp"
#include "maga/detector.hpp"
#include "maga/error.hpp"
#include "maga/rng.hpp"
#include "oracles.hpp"

using namespace maga;

namespace {

FeatureVector one_hot(std::size_t dim, std::uint32_t index, double value = 1.0) {
  FeatureVector f;
  f.dimension = dim;
  f.entries = {{index, value}};
  return f;
}

std::vector<LabeledFeatures> random_batch(CounterRng& rng, std::size_t dim,
                                          std::size_t n) {
  std::vector<LabeledFeatures> out;
  for (std::size_t k = 0; k < n; ++k) {
    FeatureVector f;
    f.dimension = dim;
    for (std::uint32_t i = 0; i < dim; ++i) {
      if (rng.uniform() < 0.5) f.entries.emplace_back(i, 3.0 * rng.uniform());
    }
    out.push_back({f, static_cast<int>(k % 2)});
  }
  return out;
}

}  // namespace

TEST(Featurize, SortedCountsAndModes) {
  FeatureSpec spec;
  spec.dimension = 64;
  const auto f = featurize("a b a", spec);
  double total = 0;
  for (std::size_t i = 1; i < f.entries.size(); ++i) {
    EXPECT_LT(f.entries[i - 1].first, f.entries[i].first);
  }
  for (const auto& [i, v] : f.entries) total += v;
  EXPECT_DOUBLE_EQ(total, 5.0);  // 3 unigrams + 2 bigrams
  EXPECT_EQ(feature_tokens("héllo", Tokenization::kCharacter).size(), 5u);
  EXPECT_EQ(feature_tokens(" a  b ", Tokenization::kWord).size(), 2u);
  spec.l2_normalize = true;
  double sq = 0;
  for (const auto& [i, v] : featurize("a b c d", spec).entries) sq += v * v;
  EXPECT_NEAR(sq, 1.0, 1e-12);
}

TEST(Score, SigmoidHandValues) {
  DetectorParams d = DetectorParams::zeros(8);
  d.weights[3] = 4.0;
  EXPECT_NEAR(score(d, one_hot(8, 3)), 0.9820, 1e-4);
  EXPECT_EQ(score(DetectorParams::zeros(8), one_hot(8, 3)), 0.5);
  EXPECT_THROW(score(d, one_hot(4, 1)), ValidationError);
}

TEST(BceLoss, HandValues) {
  DetectorParams d = DetectorParams::zeros(8);
  d.weights[3] = 4.0;
  const std::vector<LabeledFeatures> machine{{one_hot(8, 3), kMachineLabel}};
  EXPECT_NEAR(bce_loss(d, machine), 0.0181, 1e-4);
  const std::vector<LabeledFeatures> pair{{one_hot(8, 1), kHumanLabel},
                                          {one_hot(8, 2), kMachineLabel}};
  EXPECT_NEAR(bce_loss(DetectorParams::zeros(8), pair), std::log(2.0), 1e-12);
  // Saturated logits stay finite.
  d.weights[3] = -1000.0;
  EXPECT_TRUE(std::isfinite(bce_loss(d, machine)));
}

TEST(BceGradient, MatchesFiniteDifferences) {
  CounterRng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t dim = 1 + rng.below(16);
    const auto batch = random_batch(rng, dim, 2 + rng.below(6));
    DetectorParams d = DetectorParams::zeros(dim);
    for (auto& w : d.weights) w = rng.normal();
    d.bias = rng.normal();
    const auto g = bce_gradient(d, batch);
    std::vector<double> x = d.weights;
    x.push_back(d.bias);
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& v) {
          DetectorParams q;
          q.weights.assign(v.begin(), v.end() - 1);
          q.bias = v.back();
          return bce_loss(q, batch);
        },
        x, 1e-6);
    std::vector<double> analytic = g.weights;
    analytic.push_back(g.bias);
    EXPECT_LE(oracle::relative_error(analytic, fd), 1e-5);
  }
}

TEST(Train, LossDecreasesAndIsDeterministic) {
  const auto corpus = pair_by_title(separable_corpus(60, 3));
  FeatureSpec spec;
  TrainHyper h;
  h.epochs = 5;
  const auto a = train(DetectorParams::zeros(spec.dimension), corpus, spec, h);
  const auto b = train(DetectorParams::zeros(spec.dimension), corpus, spec, h);
  EXPECT_EQ(a.params, b.params);
  EXPECT_LT(a.epoch_loss.back(), a.epoch_loss.front());
  EXPECT_LT(a.epoch_loss.front(), std::log(2.0) + 1e-9);
}

TEST(Train, FanOutDrawsOneMachinePerTitle) {
  std::vector<DocumentRecord> records;
  for (int i = 0; i < 4; ++i) {
    DocumentRecord h;
    h.id = "h" + std::to_string(i);
    h.title = "t" + std::to_string(i);
    h.text = "the cat";
    records.push_back(h);
    for (int j = 0; j < 3; ++j) {
      DocumentRecord m = h;
      m.id = h.id + "m" + std::to_string(j);
      m.model = "M" + std::to_string(j);
      m.label = kMachineLabel;
      m.text = "moreover cat";
      records.push_back(m);
    }
  }
  FeatureSpec spec;
  spec.dimension = 32;
  TrainHyper h;
  h.epochs = 1;
  h.batch_size = 100;
  h.learning_rate = 1.0;
  const auto r = train(DetectorParams::zeros(32), pair_by_title(records), spec, h);
  // Balanced batch: the bias gradient at zero is exactly zero.
  EXPECT_EQ(r.params.bias, 0.0);
}

TEST(Accuracy, SeparableCorpus) {
  const auto corpus = pair_by_title(separable_corpus(100, 5));
  FeatureSpec spec;
  const auto r = train(DetectorParams::zeros(spec.dimension), corpus, spec, TrainHyper{});
  std::vector<LabeledFeatures> ex;
  for (const auto& p : corpus.pairs) {
    ex.push_back({featurize(p.human.text, spec), kHumanLabel});
    ex.push_back({featurize(p.machines[0].text, spec), kMachineLabel});
  }
  EXPECT_GE(accuracy(r.params, ex), 0.99);
  const auto& text = corpus.pairs[0].machines[0].text;
  EXPECT_EQ(reward(r.params, text, spec), 1.0 - score(r.params, featurize(text, spec)));
}

TEST(Checkpoint, JsonRoundTrip) {
  DetectorCheckpoint c;
  c.spec.dimension = 16;
  c.spec.orders = {1, 3};
  c.spec.mode = Tokenization::kCharacter;
  c.params = DetectorParams::zeros(16);
  c.params.weights[5] = -0.25;
  c.params.bias = 0.125;
  const auto back = checkpoint_from_json(checkpoint_to_json(c));
  EXPECT_EQ(back.params, c.params);
  EXPECT_EQ(back.spec.orders, c.spec.orders);
  EXPECT_EQ(back.spec.mode, Tokenization::kCharacter);
}

TEST(Hyper, Validation) {
  TrainHyper h;
  h.learning_rate = 0;
  EXPECT_THROW(h.validate(), ValidationError);
  FeatureSpec s;
  s.dimension = 0;
  EXPECT_THROW(s.validate(), ValidationError);
}
