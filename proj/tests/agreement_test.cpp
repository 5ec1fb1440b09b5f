#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"

using namespace discorel;
using namespace testkit;

namespace {

std::vector<LabelSetPair> random_pairs(std::mt19937_64& rng, std::size_t n, std::size_t pool) {
  std::vector<LabelSetPair> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(random_set(rng, pool), random_set(rng, pool));
  return out;
}

// Closed form of the resampling expectation: every A set against every B set.
double exact_chance(const std::vector<LabelSetPair>& pairs) {
  double hits = 0;
  for (const auto& [a, _] : pairs)
    for (const auto& [__, b] : pairs) hits += oracle::partial(a, b) ? 1 : 0;
  return hits / static_cast<double>(pairs.size() * pairs.size());
}

std::vector<double> onehot(std::size_t i) {
  std::vector<double> v(30, 0.0);
  v[i] = 1.0;
  return v;
}

}  // namespace

TEST(SetAgreement, Examples) {
  EXPECT_TRUE(full_agreement(S({"conjunction", "result"}), S({"result", "conjunction"})));
  EXPECT_FALSE(full_agreement(S({"conjunction", "result"}), S({"result"})));
  EXPECT_TRUE(partial_agreement(S({"conjunction", "result"}), S({"result", "precedence"})));
  EXPECT_FALSE(partial_agreement(S({"contrast"}), S({"conjunction"})));
  EXPECT_THROW(full_agreement(LabelSet{}, S({"result"})), Error);
  EXPECT_THROW(partial_agreement(S({"result"}), LabelSet{}), Error);
}

TEST(SetAgreement, RatesMatchBruteForce) {
  std::mt19937_64 rng(11);
  for (int fixture = 0; fixture < 200; ++fixture) {
    auto pairs = random_pairs(rng, 1 + fixture % 40, 3 + fixture % 12);
    std::size_t f = 0, p = 0;
    for (const auto& [a, b] : pairs) {
      f += oracle::full(a, b);
      p += oracle::partial(a, b);
    }
    EXPECT_EQ(full_rate(pairs), static_cast<double>(f) / pairs.size());
    EXPECT_EQ(partial_rate(pairs), static_cast<double>(p) / pairs.size());
    for (const auto& [a, b] : pairs)
      if (full_agreement(a, b)) EXPECT_TRUE(partial_agreement(a, b));
  }
}

TEST(Jsd, Examples) {
  auto p = onehot(3), q = onehot(7);
  EXPECT_EQ(jsd(p, p), 0.0);
  EXPECT_NEAR(jsd(p, q), 1.0, 1e-12);
  EXPECT_EQ(jsd_flat(S({"result"}), S({"result"}), 30), 0.0);
  EXPECT_NEAR(jsd_flat(S({"result"}), S({"conjunction"}), 30), 1.0, 1e-12);
  EXPECT_NEAR(jsd(p, q, LogBase::natural), std::log(2.0), 1e-12);
}

TEST(Jsd, Errors) {
  std::vector<double> bad(30, 0.0);
  bad[0] = 0.5;
  EXPECT_THROW(jsd(bad, onehot(0)), Error);
  try {
    jsd(onehot(0), std::vector<double>(29, 1.0 / 29));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_normalized);
  }
  EXPECT_THROW(jsd_flat(LabelSet{}, S({"result"}), 30), Error);
}

TEST(Jsd, RandomizedProperties) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 1000; ++k) {
    auto p = random_distribution(rng, 30, k % 3 == 0 ? 0.8 : 0.3);
    auto q = random_distribution(rng, 30, k % 5 == 0 ? 0.8 : 0.3);
    const double d = jsd(p, q);
    EXPECT_EQ(d, jsd(q, p));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_NEAR(d, oracle::jsd2(p, q), 1e-12);
    EXPECT_EQ(jsd(p, p), 0.0);
  }
}

TEST(Jsd, PartialAgreementImpliesFlatBelowOne) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 500; ++k) {
    auto a = random_set(rng, 10), b = random_set(rng, 10);
    if (partial_agreement(a, b)) EXPECT_LT(jsd_flat(a, b, 30), 1.0);
    else EXPECT_NEAR(jsd_flat(a, b, 30), 1.0, 1e-12);
  }
}

TEST(Entropy, Examples) {
  EXPECT_EQ(entropy(votes({{"conjunction", 10}})), 0.0);
  VoteSet uniform("u", Method::dc);
  for (std::size_t i = 0; i < 29; ++i) uniform.add(LabelId{i});
  EXPECT_NEAR(entropy(uniform), 1.0, 1e-12);
  auto vs = votes({{"result", 4}, {"conjunction", 3}, {"succession", 2}, {"arg1-as-detail", 1}});
  EXPECT_NEAR(entropy(vs), oracle::entropy({4, 3, 2, 1}, 29), 1e-14);
}

TEST(Entropy, PermutationInvarianceAndMaximum) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> c(1, 9);
  for (int k = 0; k < 200; ++k) {
    std::vector<int> counts(1 + k % 12);
    for (auto& x : counts) x = c(rng);
    VoteSet a("a", Method::dc), b("b", Method::dc);
    auto perm = counts;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < counts.size(); ++i) a.add(LabelId{i}, counts[i]), b.add(LabelId{29 - i}, perm[i]);
    EXPECT_NEAR(entropy(a), entropy(b), 1e-12);
    VoteSet flat("f", Method::dc);
    for (std::size_t i = 0; i < counts.size(); ++i) flat.add(LabelId{i}, 3);
    EXPECT_LE(entropy(a), entropy(flat) + 1e-12);
  }
}

TEST(Kappa, DegenerateAndDisjoint) {
  std::vector<LabelSetPair> same(20, {S({"result"}), S({"result"})});
  try {
    multilabel_kappa(same, {2000, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_chance);
  }
  std::vector<LabelSetPair> disjoint;
  for (int i = 0; i < 30; ++i) disjoint.emplace_back(S({"result"}), S({i % 2 ? "contrast" : "conjunction"}));
  auto r = multilabel_kappa_detail(disjoint, {2000, 1, 1});
  EXPECT_EQ(r.observed, 0.0);
  EXPECT_LE(r.kappa, 0.0);
  EXPECT_THROW(multilabel_kappa(std::vector<LabelSetPair>{}), Error);
}

TEST(Kappa, SeedDeterminismAndThreadIndependence) {
  std::mt19937_64 rng(99);
  auto pairs = random_pairs(rng, 150, 8);
  auto a = multilabel_kappa_detail(pairs, {10000, 42, 1});
  auto b = multilabel_kappa_detail(pairs, {10000, 42, 1});
  auto c = multilabel_kappa_detail(pairs, {10000, 42, 7});
  EXPECT_EQ(a.kappa, b.kappa);
  EXPECT_EQ(a.expected, b.expected);
  EXPECT_EQ(a.kappa, c.kappa);
  EXPECT_EQ(a.expected, c.expected);
  auto d = multilabel_kappa_detail(pairs, {10000, 43, 1});
  EXPECT_NE(a.expected, d.expected);
}

TEST(Kappa, ExpectedAgreementConvergesToClosedForm) {
  std::mt19937_64 rng(5);
  for (int f = 0; f < 5; ++f) {
    auto pairs = random_pairs(rng, 80 + 20 * f, 6 + f);
    auto r = multilabel_kappa_detail(pairs, {10000, 7u + f, 0});
    EXPECT_NEAR(r.expected, exact_chance(pairs), 5 * r.expected_stderr + 1e-12);
    EXPECT_NEAR(r.observed, partial_rate(pairs), 0.0);
    EXPECT_LE(r.kappa, r.observed);
    EXPECT_NEAR(r.kappa, (r.observed - r.expected) / (1 - r.expected), 1e-15);
  }
}

TEST(Kappa, SpreadAcrossSeeds) {
  std::mt19937_64 rng(17);
  auto pairs = random_pairs(rng, 300, 10);
  std::vector<double> ae;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) ae.push_back(multilabel_kappa_detail(pairs, {10000, seed, 0}).expected);
  double mean = 0;
  for (double x : ae) mean += x / ae.size();
  double ss = 0;
  for (double x : ae) ss += (x - mean) * (x - mean);
  EXPECT_LT(std::sqrt(ss / (ae.size() - 1)), 0.005);
}

TEST(Kappa, NeverExceedsPartialRate) {
  std::mt19937_64 rng(23);
  for (int f = 0; f < 40; ++f) {
    auto pairs = random_pairs(rng, 10 + f, 4 + f % 6);
    try {
      auto r = multilabel_kappa_detail(pairs, {1000, 1, 1});
      EXPECT_LE(r.kappa, r.observed + 1e-15);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::degenerate_chance);
    }
  }
}

TEST(Reports, MethodsAndReference) {
  CorpusBuilder b;
  b.item("a", "wikipedia", S({"result"}))
      .item("b", "wikipedia", S({"conjunction"}))
      .item("c", "pdtb", S({"contrast"}))
      .item("d", "pdtb", S({"reason"}))
      .sublabels("a", Method::dc, S({"result", "conjunction"}))
      .sublabels("a", Method::qa, S({"result"}))
      .sublabels("b", Method::dc, S({"conjunction"}))
      .sublabels("b", Method::qa, S({"conjunction"}))
      .sublabels("c", Method::dc, S({"arg2-as-denier"}))
      .sublabels("c", Method::qa, S({"contrast"}))
      .vote("d", Method::dc, "reason")
      .vote("d", Method::dc, "result")
      .sublabels("d", Method::qa, S({"reason"}));
  AgreementOptions opt;
  opt.kappa = {2000, 3, 1};
  auto rep = compare_methods(b.corpus, Method::dc, Method::qa, opt);
  EXPECT_EQ(rep.overall.n_items, 3u);
  EXPECT_EQ(rep.overall.n_excluded, 1u);  // d is all-minority on the DC side
  EXPECT_NEAR(rep.overall.full_rate, 1.0 / 3, 1e-12);
  EXPECT_NEAR(rep.overall.partial_rate, 2.0 / 3, 1e-12);
  EXPECT_NEAR(rep.overall.sublabels_a, 4.0 / 3, 1e-12);
  ASSERT_EQ(rep.per_genre.size(), 2u);
  EXPECT_EQ(rep.per_genre[0].scope, "wikipedia");
  EXPECT_EQ(rep.per_genre[1].n_excluded, 1u);
  const double flat_a = oracle::jsd2(flatten(S({"result", "conjunction"}), 30).probs, flatten(S({"result"}), 30).probs);
  EXPECT_NEAR(*rep.overall.mean_jsd_flat, (flat_a + 0 + 1) / 3, 1e-12);
  EXPECT_NEAR(*rep.overall.mean_jsd, (flat_a + 0 + 1) / 3, 1e-12);  // two votes per label, so filtered == flat

  auto ref = compare_with_reference(b.corpus, Method::qa, opt);
  EXPECT_EQ(ref.side_b, "reference");
  EXPECT_EQ(ref.overall.n_items, 4u);
  EXPECT_EQ(ref.overall.full_rate, 1.0);
  EXPECT_FALSE(ref.overall.mean_jsd.has_value());
  EXPECT_EQ(*ref.overall.mean_jsd_flat, 0.0);

  CorpusBuilder nr;
  nr.item("x", "novel").sublabels("x", Method::dc, S({"result"}));
  EXPECT_THROW(compare_with_reference(nr.corpus, Method::dc), Error);
  EXPECT_THROW(compare_methods(nr.corpus, Method::dc, Method::qa), Error);
}

TEST(Correlation, EntropyVersusJsd) {
  EXPECT_FALSE(pearson(std::vector<double>{0.3, 0.3, 0.3}, std::vector<double>{0.1, 0.5, 0.9}).has_value());
  // Monotone fixture: more spread in the votes, less overlap with the reference.
  CorpusBuilder b;
  const char* labels[] = {"conjunction", "result", "reason", "contrast", "precedence", "arg2-as-detail"};
  for (int k = 0; k < 6; ++k) {
    auto id = "m" + std::to_string(k);
    b.item(id, "wikipedia", S({"conjunction"}));
    b.vote(id, Method::dc, "conjunction", 4);
    for (int j = 1; j <= k; ++j) b.vote(id, Method::dc, labels[j], 2);
  }
  auto corr = entropy_jsd_correlation(b.corpus, Method::dc);
  ASSERT_TRUE(corr.r.has_value());
  EXPECT_EQ(corr.series.size(), 6u);
  for (std::size_t i = 1; i < corr.series.size(); ++i) {
    EXPECT_GT(corr.series[i].entropy, corr.series[i - 1].entropy);
    EXPECT_GT(corr.series[i].jsd_flat, corr.series[i - 1].jsd_flat);
  }
  EXPECT_GT(*corr.r, 0.8);

  std::vector<EntropyJsdPoint> line;
  for (int i = 0; i < 10; ++i) line.push_back({"i", "g", 0.1 * i, 0.05 * i + 0.2});
  EXPECT_GT(*correlate(line).r, 0.99);
}

TEST(Entropy, ByGenre) {
  CorpusBuilder b;
  b.item("a", "novel").item("b", "novel").item("c", "europarl");
  b.vote("a", Method::qa, "result", 10);
  b.vote("b", Method::qa, "result", 5).vote("b", Method::qa, "reason", 5);
  b.vote("c", Method::qa, "contrast", 10);
  auto rows = entropy_by_genre(b.corpus, Method::qa);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].genre, "europarl");
  EXPECT_EQ(rows[0].mean_entropy, 0.0);
  EXPECT_NEAR(rows[1].mean_entropy, oracle::entropy({5, 5}, 29) / 2, 1e-12);
  EXPECT_EQ(rows[2].genre, "all");
  EXPECT_EQ(rows[2].n_items, 3u);
}
