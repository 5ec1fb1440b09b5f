#pragma once

// Shared test fixtures and reference implementations. The oracles here are
// written directly from the definitions, sharing no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "discorel/discorel.hpp"

namespace testkit {

using namespace discorel;

inline const SenseVocabulary& V() { return SenseVocabulary::pdtb3(); }

inline LabelId L(const std::string& id) { return V().parse_id(id); }

inline LabelSet S(std::initializer_list<const char*> ids) {
  LabelSet out;
  for (const char* id : ids) out.insert(L(id));
  return out;
}

inline VoteSet votes(std::initializer_list<std::pair<const char*, int>> counts, Method m = Method::dc,
                     std::string item = "i") {
  VoteSet vs(std::move(item), m);
  for (auto [id, n] : counts) vs.add(L(id), n);
  return vs;
}

// Non-empty random label set over the first `pool` vocabulary labels.
inline LabelSet random_set(std::mt19937_64& rng, std::size_t pool = 30, std::size_t max_size = 4) {
  std::uniform_int_distribution<std::size_t> size(1, std::min(max_size, pool)), pick(0, pool - 1);
  LabelSet s;
  const auto want = size(rng);
  while (s.size() < want) s.insert(LabelId{pick(rng)});
  return s;
}

inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n, double zero_prob = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double sum = 0;
  for (auto& x : p) {
    x = u(rng) < zero_prob ? 0.0 : u(rng);
    sum += x;
  }
  if (sum == 0) {
    p[0] = 1.0;
    return p;
  }
  for (auto& x : p) x /= sum;
  return p;
}

namespace oracle {

inline bool full(const LabelSet& a, const LabelSet& b) {
  if (a.size() != b.size()) return false;
  for (auto x : a) {
    bool found = false;
    for (auto y : b) found = found || x == y;
    if (!found) return false;
  }
  return true;
}

inline bool partial(const LabelSet& a, const LabelSet& b) {
  for (auto x : a)
    for (auto y : b)
      if (x == y) return true;
  return false;
}

inline double kl2(const std::vector<double>& p, const std::vector<double>& m) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * std::log2(p[i] / m[i]);
  return s;
}

inline double jsd2(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl2(p, m) + 0.5 * kl2(q, m);
}

inline double entropy(const std::vector<int>& counts, double base) {
  double total = 0;
  for (int c : counts) total += c;
  double h = 0;
  for (int c : counts)
    if (c > 0) h -= (c / total) * std::log(c / total) / std::log(base);
  return h;
}

inline double softmax_at(const std::vector<double>& z, std::size_t i) {
  double den = 0;
  for (double x : z) den += std::exp(x);
  return std::exp(z[i]) / den;
}

// Pearson chi-squared statistic computed from the textbook formula.
inline double chi2(const std::vector<std::vector<double>>& m) {
  double total = 0;
  std::vector<double> r(m.size(), 0), c(m[0].size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) r[i] += m[i][j], c[j] += m[i][j], total += m[i][j];
  double s = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      double e = r[i] * c[j] / total;
      s += (m[i][j] - e) * (m[i][j] - e) / e;
    }
  return s;
}

}  // namespace oracle

// Two-method corpus builder.
struct CorpusBuilder {
  Corpus corpus{V()};
  int next_worker = 0;

  CorpusBuilder& item(const std::string& id, const std::string& genre, std::optional<LabelSet> ref = std::nullopt,
                      std::string s1 = "first sentence", std::string s2 = "second sentence") {
    RelationItem it;
    it.item_id = id;
    it.genre = genre;
    it.s1 = std::move(s1);
    it.s2 = std::move(s2);
    it.reference = std::move(ref);
    corpus.add_item(std::move(it));
    return *this;
  }

  CorpusBuilder& vote(const std::string& id, Method m, const std::string& sense, int n = 1) {
    for (int k = 0; k < n; ++k)
      corpus.add_vote(Vote{id, m, "w" + std::to_string(next_worker++), L(sense), std::nullopt});
    return *this;
  }

  // Each label of `labels` gets two votes, so the sub-label set is exactly `labels`.
  CorpusBuilder& sublabels(const std::string& id, Method m, const LabelSet& labels) {
    for (auto l : labels) vote(id, m, V().at(l).id, 2);
    return *this;
  }
};

}  // namespace testkit
