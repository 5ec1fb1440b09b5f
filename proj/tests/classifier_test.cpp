#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"

using namespace discorel;
using namespace discorel::classifier;
using namespace testkit;

namespace {

Example make_example(const std::string& s1, const std::string& s2, LabelId label, const FeatureConfig& fc,
                     LossKind loss = LossKind::hard) {
  VoteSet vs("x", Method::dc);
  vs.add(label, 5);
  auto t = make_targets(vs, loss, 30);
  Example ex;
  ex.item_id = s1;
  ex.x = featurize(s1, s2, fc);
  ex.target = t.probs;
  ex.majority = label;
  ex.sublabels = {label};
  return ex;
}

// Fifty items whose label is decided by a single cue word.
std::vector<Example> separable_fixture(const FeatureConfig& fc) {
  const char* cues[] = {"because", "however", "then", "also", "instance"};
  const char* senses[] = {"reason", "contrast", "precedence", "conjunction", "arg2-as-instance"};
  const char* filler[] = {"the river", "a small dog", "our old house", "that committee", "the morning train",
                          "his report", "this vote", "a quiet town", "their plan", "the long winter"};
  std::vector<Example> out;
  for (int i = 0; i < 50; ++i) {
    int c = i % 5;
    std::string s1 = std::string(filler[i % 10]) + " was mentioned";
    std::string s2 = std::string(cues[c]) + " " + filler[(i * 3 + 1) % 10] + " followed";
    out.push_back(make_example(s1, s2, L(senses[c]), fc));
  }
  return out;
}

}  // namespace

TEST(Targets, HardIsOneHotAtMajority) {
  auto t = make_targets(votes({{"result", 4}, {"conjunction", 3}, {"precedence", 2}, {"arg1-as-detail", 1}}),
                        LossKind::hard, 30);
  EXPECT_EQ(t.majority.label, L("result"));
  EXPECT_EQ(t.provenance, TargetProvenance::hard_majority);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(t.probs[i], i == L("result").value ? 1.0 : 0.0);
}

TEST(Targets, SoftMatchesDirectEvaluation) {
  auto t = make_targets(votes({{"result", 4}, {"conjunction", 3}, {"precedence", 2}, {"arg1-as-detail", 1}}),
                        LossKind::soft, 30);
  std::vector<double> z(30, 0.0);
  z[L("result").value] = 4;
  z[L("conjunction").value] = 3;
  z[L("precedence").value] = 2;
  z[L("arg1-as-detail").value] = 1;
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(t.probs[i], oracle::softmax_at(z, i), 1e-12);
  const double closed = std::exp(4.0) / (std::exp(4.0) + std::exp(3.0) + std::exp(2.0) + std::exp(1.0) + 26.0);
  EXPECT_NEAR(t.probs[L("result").value], closed, 1e-12);
  EXPECT_NEAR(t.probs[L("result").value], 0.4928, 1e-4);
  EXPECT_EQ(t.provenance, TargetProvenance::soft_softmax);

  auto u = make_targets(votes({{"conjunction", 10}}), LossKind::soft, 30);
  EXPECT_NEAR(u.probs[L("conjunction").value], std::exp(10.0) / (std::exp(10.0) + 29.0), 1e-12);
  EXPECT_NEAR(u.probs[L("conjunction").value], 0.99869, 1e-5);
}

TEST(Targets, SoftProperties) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> n(0, 12);
  for (int k = 0; k < 200; ++k) {
    VoteSet vs("i", Method::qa);
    std::vector<int> counts(30, 0);
    for (int j = 0; j < 4; ++j) {
      auto l = random_set(rng, 30, 1);
      int c = n(rng) + 1;
      vs.add(*l.begin(), c);
      counts[l.begin()->value] += c;
    }
    auto t = make_targets(vs, LossKind::soft, 30);
    EXPECT_NEAR(std::accumulate(t.probs.begin(), t.probs.end(), 0.0), 1.0, 1e-9);
    for (std::size_t i = 0; i < 30; ++i) {
      EXPECT_GT(t.probs[i], 0.0);
      for (std::size_t j = 0; j < 30; ++j)
        if (counts[i] > counts[j]) EXPECT_GT(t.probs[i], t.probs[j]);
    }
    auto h = make_targets(vs, LossKind::hard, 30);
    EXPECT_EQ(argmax(std::span<const double>(t.probs)), argmax(std::span<const double>(h.probs)));
  }
  EXPECT_THROW(make_targets(VoteSet("e", Method::dc), LossKind::soft, 30), Error);
}

TEST(Targets, UnionProvenanceAndTies) {
  auto t = make_targets(votes({{"result", 3}, {"reason", 3}}), LossKind::soft, 30, true);
  EXPECT_EQ(t.provenance, TargetProvenance::union_softmax);
  EXPECT_TRUE(t.majority.tie);
  EXPECT_EQ(t.majority.label, L("reason").value < L("result").value ? L("reason") : L("result"));
}

TEST(MixUnion, Examples) {
  auto a = votes({{"conjunction", 3}, {"result", 7}}, Method::dc, "x");
  auto b = votes({{"result", 5}, {"reason", 2}}, Method::qa, "x");
  auto m = mix_union(a, b);
  EXPECT_EQ(m.count(L("result")), 12);
  EXPECT_EQ(m.count(L("conjunction")), 3);
  EXPECT_EQ(m.count(L("reason")), 2);
  EXPECT_EQ(m.total(), 17);

  auto c = votes({{"precedence", 1}}, Method::qa, "x");
  EXPECT_EQ(mix_union(a, b).counts(), mix_union(b, a).counts());
  EXPECT_EQ(mix_union(mix_union(a, b), c).counts(), mix_union(a, mix_union(b, c)).counts());
  EXPECT_THROW(mix_union(a, votes({{"result", 1}}, Method::qa, "y")), Error);
}

TEST(Features, DeterministicAndNormalized) {
  FeatureConfig fc;
  auto x = featurize("The cat sat.", "It was tired", fc);
  auto y = featurize("the CAT sat", "it was tired!", fc);
  EXPECT_EQ(x, y);
  double norm = 0;
  for (auto [i, v] : x) {
    EXPECT_LT(i, fc.buckets);
    norm += v * v;
  }
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_NE(featurize("a b", "c", fc), featurize("c", "a b", fc));
  FeatureConfig zero;
  zero.buckets = 0;
  EXPECT_THROW(featurize("a", "b", zero), Error);
}

TEST(Gradient, MatchesCentralDifferences) {
  FeatureConfig fc;
  fc.buckets = 64;
  std::mt19937_64 rng(9);
  std::vector<Example> batch;
  const char* words[] = {"rain", "fell", "so", "we", "stayed", "in", "but", "later", "left", "town"};
  std::uniform_int_distribution<int> w(0, 9);
  for (int i = 0; i < 6; ++i) {
    std::string s1, s2;
    for (int k = 0; k < 4; ++k) s1 += std::string(words[w(rng)]) + " ";
    for (int k = 0; k < 4; ++k) s2 += std::string(words[w(rng)]) + " ";
    VoteSet vs("g", Method::dc);
    for (auto l : random_set(rng, 30, 3)) vs.add(l, w(rng) + 1);
    auto t = make_targets(vs, LossKind::soft, 30);
    batch.push_back(Example{"g", featurize(s1, s2, fc), t.probs, t.majority.label, {}});
  }
  LinearModel model(fc, 30);
  model.randomize(3, 0.3);
  std::vector<double> grad;
  loss_and_gradient(model, batch, &grad);

  // Probe parameters that the batch actually touches, plus bias terms.
  std::vector<std::size_t> probe;
  for (std::size_t c : {0u, 5u, 17u}) probe.push_back(static_cast<std::size_t>(batch[0].x[0].first) * 30 + c);
  for (std::size_t c : {2u, 29u}) probe.push_back(static_cast<std::size_t>(batch[3].x[1].first) * 30 + c);
  std::uniform_int_distribution<std::size_t> any(0, model.parameter_count() - 1);
  while (probe.size() < 8) probe.push_back(any(rng));
  probe.push_back(model.weights().size() + 4);
  probe.push_back(model.weights().size() + 21);

  const double h = 1e-5;
  for (auto i : probe) {
    const double orig = model.parameter(i);
    model.parameter(i) = orig + h;
    const double up = loss_and_gradient(model, batch, nullptr);
    model.parameter(i) = orig - h;
    const double down = loss_and_gradient(model, batch, nullptr);
    model.parameter(i) = orig;
    EXPECT_LT(std::abs((up - down) / (2 * h) - grad[i]), 1e-5) << "parameter " << i;
  }
}

TEST(Gradient, VanishesWhenPredictionEqualsTarget) {
  FeatureConfig fc;
  fc.buckets = 16;
  LinearModel model(fc, 30);
  std::vector<double> uniform(30, 1.0 / 30);
  std::vector<Example> batch{Example{"u", featurize("a b", "c d", fc), uniform, LabelId{0}, {}}};
  std::vector<double> grad;
  const double loss = loss_and_gradient(model, batch, &grad);
  EXPECT_NEAR(loss, std::log(30.0), 1e-12);
  for (double g : grad) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Training, FullBatchLossIsMonotone) {
  FeatureConfig fc;
  fc.buckets = 1024;
  auto data = separable_fixture(fc);
  TrainConfig cfg;
  cfg.batch_size = data.size();
  cfg.dev_size = 0;
  cfg.epochs = 25;
  cfg.learning_rate = 0.5;
  TrainReport rep;
  train(data, cfg, fc, 30, &rep);
  ASSERT_EQ(rep.train_loss.size(), 25u);
  for (std::size_t i = 1; i < rep.train_loss.size(); ++i) EXPECT_LE(rep.train_loss[i], rep.train_loss[i - 1] + 1e-12);
  EXPECT_EQ(rep.n_dev, 0u);
}

TEST(Training, SeparableFixtureIsLearned) {
  FeatureConfig fc;
  fc.buckets = 4096;
  auto data = separable_fixture(fc);
  TrainConfig cfg;
  cfg.loss = LossKind::hard;
  cfg.dev_size = 0;
  cfg.epochs = 40;
  TrainReport rep;
  auto model = train(data, cfg, fc, 30, &rep);
  auto r = evaluate(model, data);
  EXPECT_GE(r.hard_acc, 0.95);
  EXPECT_EQ(r.n, 50u);
  EXPECT_LT(rep.train_loss.back(), rep.train_loss.front());
}

TEST(Training, DeterministicGivenSeedAndEarlyStops) {
  FeatureConfig fc;
  fc.buckets = 512;
  auto data = separable_fixture(fc);
  TrainConfig cfg;
  cfg.dev_size = 10;
  cfg.epochs = 200;
  cfg.patience = 2;
  cfg.learning_rate = 2.0;
  cfg.init_stddev = 0.01;
  TrainReport r1, r2;
  auto a = train(data, cfg, fc, 30, &r1);
  auto b = train(data, cfg, fc, 30, &r2);
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_EQ(r1.train_loss, r2.train_loss);
  EXPECT_EQ(r1.n_dev, 10u);
  EXPECT_EQ(r1.n_train, 40u);
  EXPECT_LE(r1.best_epoch, r1.train_loss.size());
  if (r1.stopped_early) EXPECT_LT(r1.train_loss.size(), 200u);
}

TEST(Training, DevSplitCappedAtFifth) {
  FeatureConfig fc;
  fc.buckets = 64;
  auto data = separable_fixture(fc);
  TrainConfig cfg;
  cfg.dev_size = 1000;
  cfg.epochs = 1;
  TrainReport rep;
  train(data, cfg, fc, 30, &rep);
  EXPECT_EQ(rep.n_dev, 10u);
}

TEST(Training, DivergenceIsReported) {
  FeatureConfig fc;
  fc.buckets = 64;
  auto data = separable_fixture(fc);
  TrainConfig cfg;
  cfg.learning_rate = 1e308;
  cfg.dev_size = 0;
  try {
    train(data, cfg, fc, 30, nullptr);
    FAIL() << "training with an absurd learning rate did not diverge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::divergence_detected);
  }
  cfg.learning_rate = 0.1;
  cfg.epochs = 0;
  EXPECT_THROW(train(data, cfg, fc, 30, nullptr), Error);
  EXPECT_THROW(train({}, TrainConfig{}, fc, 30, nullptr), Error);
}

TEST(Model, SerializeRoundTrip) {
  FeatureConfig fc;
  fc.buckets = 128;
  fc.max_ngram = 3;
  fc.hash_seed = 11;
  LinearModel m(fc, 30);
  m.randomize(5, 1.0);
  auto blob = m.serialize(V(), "loss=soft");
  auto back = LinearModel::deserialize(blob);
  EXPECT_EQ(back.weights(), m.weights());
  EXPECT_EQ(back.bias(), m.bias());
  EXPECT_EQ(back.features().buckets, 128u);
  EXPECT_EQ(back.features().max_ngram, 3);
  EXPECT_EQ(back.features().hash_seed, 11u);
  EXPECT_THROW(LinearModel::deserialize("garbage"), Error);
  EXPECT_THROW(LinearModel::deserialize(blob.substr(0, blob.size() - 8)), Error);
}

TEST(Evaluation, PerfectAndUniformPredictors) {
  FeatureConfig fc;
  fc.buckets = 64;
  auto data = separable_fixture(fc);
  auto perfect = evaluate_with([](const Example& ex) { return ex.target; }, std::span<const Example>(data));
  EXPECT_DOUBLE_EQ(perfect.hard_acc, 1.0);
  EXPECT_DOUBLE_EQ(perfect.soft_acc, 1.0);
  EXPECT_NEAR(perfect.mean_jsd, 0.0, 1e-12);

  auto uniform = evaluate_with([](const Example&) { return std::vector<double>(30, 1.0 / 30); },
                               std::span<const Example>(data));
  std::vector<double> u(30, 1.0 / 30);
  EXPECT_NEAR(uniform.mean_jsd, oracle::jsd2(u, data[0].target), 1e-12);
  EXPECT_DOUBLE_EQ(evaluate_with([](const Example&) { return std::vector<double>(30, 0.0); },
                                 std::span<const Example>()).hard_acc, 0.0);
}

TEST(Evaluation, SoftAccuracyUsesSubLabels) {
  FeatureConfig fc;
  fc.buckets = 16;
  Example ex = make_example("a", "b", L("result"), fc);
  ex.sublabels = S({"result", "conjunction"});
  std::vector<Example> one{ex};
  auto r = evaluate_with(
      [](const Example&) {
        std::vector<double> p(30, 0.0);
        p[L("conjunction").value] = 1.0;
        return p;
      },
      std::span<const Example>(one));
  EXPECT_EQ(r.hard_acc, 0.0);
  EXPECT_EQ(r.soft_acc, 1.0);
}

TEST(Dataset, MixingModes) {
  CorpusBuilder b;
  b.item("a", "wikipedia").vote("a", Method::dc, "result", 3).vote("a", Method::qa, "reason", 2);
  b.item("b", "novel").vote("b", Method::dc, "contrast", 2);
  b.item("c", "novel").vote("c", Method::qa, "precedence", 4);
  FeatureConfig fc;
  fc.buckets = 32;
  auto dc = build_examples(b.corpus, Mix::dc, LossKind::hard, fc);
  ASSERT_EQ(dc.size(), 2u);
  EXPECT_EQ(dc[0].majority, L("result"));
  auto inter = build_examples(b.corpus, Mix::intersection, LossKind::hard, fc);
  ASSERT_EQ(inter.size(), 3u);
  EXPECT_EQ(inter[0].majority, L("reason"));
  auto uni = build_examples(b.corpus, Mix::union_, LossKind::soft, fc);
  ASSERT_EQ(uni.size(), 3u);
  EXPECT_EQ(uni[0].majority, L("result"));
  EXPECT_GT(uni[0].target[L("reason").value], uni[0].target[L("contrast").value]);
  EXPECT_EQ(uni[0].sublabels, S({"result", "reason"}));
  EXPECT_EQ(parse_mix("Union"), Mix::union_);
  EXPECT_THROW(parse_mix("both"), Error);
  EXPECT_EQ(parse_loss("SOFT"), LossKind::soft);
}
