#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "discorel/corpus.hpp"
#include "discorel/error.hpp"

namespace discorel {

// ---------------------------------------------------------------------------
// Set agreement
// ---------------------------------------------------------------------------

inline void require_non_empty(const LabelSet& a, const LabelSet& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::empty_set, "agreement needs non-empty label sets");
}

inline bool full_agreement(const LabelSet& a, const LabelSet& b) {
  require_non_empty(a, b);
  return a == b;
}

inline bool partial_agreement(const LabelSet& a, const LabelSet& b) {
  require_non_empty(a, b);
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib) ++ia;
    else ++ib;
  }
  return false;
}

inline bool full_agreement(const SubLabelSet& a, const SubLabelSet& b) { return full_agreement(a.labels, b.labels); }
inline bool partial_agreement(const SubLabelSet& a, const SubLabelSet& b) {
  return partial_agreement(a.labels, b.labels);
}

using LabelSetPair = std::pair<LabelSet, LabelSet>;

inline double full_rate(std::span<const LabelSetPair> pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& [a, b] : pairs) n += full_agreement(a, b) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(pairs.size());
}

inline double partial_rate(std::span<const LabelSetPair> pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& [a, b] : pairs) n += partial_agreement(a, b) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Divergence and entropy
// ---------------------------------------------------------------------------

enum class LogBase { two, natural };

inline constexpr double normalization_tolerance = 1e-8;

inline void require_normalized(std::span<const double> p, const char* which) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw Error(ErrorCode::not_normalized, std::string(which) + " has a negative or non-finite entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > normalization_tolerance)
    throw Error(ErrorCode::not_normalized, std::string(which) + " sums to " + std::to_string(sum));
}

// Jensen-Shannon divergence. Base 2 by default, so the value lies in [0, 1].
// Each index contributes symmetrically, so jsd(p, q) == jsd(q, p) bit-for-bit.
inline double jsd(std::span<const double> p, std::span<const double> q, LogBase base = LogBase::two) {
  if (p.size() != q.size()) throw Error(ErrorCode::not_normalized, "distributions differ in length");
  require_normalized(p, "p");
  require_normalized(q, "q");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    double term = 0.0;
    if (p[i] > 0.0) term += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) term += q[i] * std::log(q[i] / m);
    acc += 0.5 * term;
  }
  if (base == LogBase::two) acc /= std::log(2.0);
  const double upper = base == LogBase::two ? 1.0 : std::log(2.0);
  return std::clamp(acc, 0.0, upper);
}

inline double jsd(const LabelDistribution& p, const LabelDistribution& q, LogBase base = LogBase::two) {
  return jsd(std::span<const double>(p.probs), std::span<const double>(q.probs), base);
}

inline double jsd_flat(const LabelSet& a, const LabelSet& b, std::size_t size, LogBase base = LogBase::two) {
  require_non_empty(a, b);
  return jsd(flatten(a, size), flatten(b, size), base);
}

inline double jsd_flat(const SubLabelSet& a, const SubLabelSet& b, std::size_t size, LogBase base = LogBase::two) {
  return jsd_flat(a.labels, b.labels, size, base);
}

// Entropy of the unfiltered vote distribution, log base `base` (29 by default).
inline double entropy(const VoteSet& vs, int base = 29) {
  if (vs.total() < 1) throw Error(ErrorCode::invalid_argument, "entropy of an empty vote set");
  const double total = vs.total();
  double h = 0.0;
  for (auto [label, n] : vs.counts()) {
    const double p = n / total;
    h -= p * std::log(p);
  }
  return std::max(0.0, h / std::log(static_cast<double>(base)));
}

inline double entropy(std::span<const double> probs, int base = 29) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return std::max(0.0, h / std::log(static_cast<double>(base)));
}

// ---------------------------------------------------------------------------
// Multi-label kappa with bootstrapped expected agreement
// ---------------------------------------------------------------------------

struct KappaConfig {
  std::size_t bootstrap_samples = 10'000;
  std::uint64_t rng_seed = 20230101;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;         // partial-agreement rate
  double expected = 0.0;         // bootstrap mean of chance partial agreement
  double expected_stderr = 0.0;  // standard error of `expected`
  std::size_t n_pairs = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for one resample depends only on (seed, index).
inline std::uint64_t resample_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline std::size_t bounded(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Label sets as bit rows, for fast intersection tests.
struct BitSets {
  std::size_t words = 1;
  std::vector<std::uint64_t> bits;

  explicit BitSets(std::span<const LabelSet> sets) {
    std::size_t max_label = 0;
    for (const auto& s : sets)
      if (!s.empty()) max_label = std::max(max_label, s.rbegin()->value);
    words = max_label / 64 + 1;
    bits.assign(sets.size() * words, 0);
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (auto l : sets[i]) bits[i * words + l.value / 64] |= (1ULL << (l.value % 64));
  }

  bool intersects(const BitSets& other, std::size_t i, std::size_t j) const {
    const std::size_t w = std::min(words, other.words);
    for (std::size_t k = 0; k < w; ++k)
      if (bits[i * words + k] & other.bits[j * other.words + k]) return true;
    return false;
  }
};

}  // namespace detail

// Ae is the mean partial-agreement rate when each side-A set is paired with a
// side-B set drawn with replacement from the side-B collection. The resampling
// unit is the whole item-level label set.
inline KappaResult multilabel_kappa_detail(std::span<const LabelSetPair> pairs, const KappaConfig& cfg = {}) {
  if (pairs.empty()) throw Error(ErrorCode::empty_set, "kappa needs at least one pair");
  if (cfg.bootstrap_samples == 0) throw Error(ErrorCode::invalid_argument, "bootstrap_samples must be positive");
  std::vector<LabelSet> a, b;
  a.reserve(pairs.size());
  b.reserve(pairs.size());
  for (const auto& [x, y] : pairs) {
    require_non_empty(x, y);
    a.push_back(x);
    b.push_back(y);
  }
  const detail::BitSets abits(a), bbits(b);
  const std::size_t n = pairs.size();

  KappaResult r;
  r.n_pairs = n;
  r.observed = partial_rate(pairs);

  std::vector<double> rates(cfg.bootstrap_samples);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      std::mt19937_64 rng(detail::resample_seed(cfg.rng_seed, s));
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) hits += abits.intersects(bbits, i, detail::bounded(rng, n)) ? 1 : 0;
      rates[s] = static_cast<double>(hits) / static_cast<double>(n);
    }
  };
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.bootstrap_samples));
  if (threads <= 1 || n * cfg.bootstrap_samples < 200'000) {
    run(0, cfg.bootstrap_samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cfg.bootstrap_samples + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk, end = std::min(cfg.bootstrap_samples, begin + chunk);
      if (begin < end) pool.emplace_back(run, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  // Fixed summation order keeps the result independent of scheduling.
  double sum = 0.0;
  for (double x : rates) sum += x;
  r.expected = sum / static_cast<double>(rates.size());
  if (rates.size() > 1) {
    double ss = 0.0;
    for (double x : rates) ss += (x - r.expected) * (x - r.expected);
    r.expected_stderr = std::sqrt(ss / static_cast<double>(rates.size() - 1) / static_cast<double>(rates.size()));
  }
  if (r.expected >= 1.0 - 1e-9)
    throw Error(ErrorCode::degenerate_chance, "expected agreement is 1; kappa undefined");
  r.kappa = (r.observed - r.expected) / (1.0 - r.expected);
  return r;
}

inline double multilabel_kappa(std::span<const LabelSetPair> pairs, const KappaConfig& cfg = {}) {
  return multilabel_kappa_detail(pairs, cfg).kappa;
}

// ---------------------------------------------------------------------------
// Corpus-level reports
// ---------------------------------------------------------------------------

struct AgreementRow {
  std::string scope;  // genre name or "all"
  std::size_t n_items = 0;
  std::size_t n_excluded = 0;  // items dropped because a side was all-minority or missing
  double sublabels_a = 0.0;
  double sublabels_b = 0.0;
  double full_rate = 0.0;
  double partial_rate = 0.0;
  std::optional<KappaResult> kappa;
  std::optional<double> mean_jsd;
  std::optional<double> mean_jsd_flat;
};

struct AgreementReport {
  std::string side_a;
  std::string side_b;
  AgreementRow overall;
  std::vector<AgreementRow> per_genre;
};

struct AgreementOptions {
  KappaConfig kappa;
  MinorityRule minority;
  LogBase log_base = LogBase::two;
  bool by_genre = true;
};

namespace detail {

struct PairedItem {
  std::string genre;
  LabelSet a, b;
  std::optional<double> jsd;
};

inline AgreementRow summarize(std::string scope, const std::vector<PairedItem>& items, std::size_t excluded,
                              const AgreementOptions& opt, std::size_t vocab_size) {
  AgreementRow row;
  row.scope = std::move(scope);
  row.n_items = items.size();
  row.n_excluded = excluded;
  if (items.empty()) return row;
  std::vector<LabelSetPair> pairs;
  double sa = 0, sb = 0, jsum = 0, jflat = 0;
  bool have_jsd = true;
  for (const auto& it : items) {
    pairs.emplace_back(it.a, it.b);
    sa += it.a.size();
    sb += it.b.size();
    if (it.jsd) jsum += *it.jsd;
    else have_jsd = false;
    jflat += jsd_flat(it.a, it.b, vocab_size, opt.log_base);
  }
  const double n = static_cast<double>(items.size());
  row.sublabels_a = sa / n;
  row.sublabels_b = sb / n;
  row.full_rate = full_rate(pairs);
  row.partial_rate = discorel::partial_rate(pairs);
  try {
    row.kappa = multilabel_kappa_detail(pairs, opt.kappa);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate_chance) throw;
  }
  if (have_jsd) row.mean_jsd = jsum / n;
  row.mean_jsd_flat = jflat / n;
  return row;
}

inline AgreementReport build_report(std::string a, std::string b, const std::vector<PairedItem>& items,
                                    const std::map<std::string, std::size_t>& excluded_by_genre,
                                    const std::vector<std::string>& genres, const AgreementOptions& opt,
                                    std::size_t vocab_size) {
  AgreementReport rep;
  rep.side_a = std::move(a);
  rep.side_b = std::move(b);
  std::size_t excluded = 0;
  for (const auto& [g, n] : excluded_by_genre) excluded += n;
  rep.overall = summarize("all", items, excluded, opt, vocab_size);
  if (opt.by_genre) {
    for (const auto& g : genres) {
      std::vector<PairedItem> sub;
      for (const auto& it : items)
        if (it.genre == g) sub.push_back(it);
      auto ex = excluded_by_genre.count(g) ? excluded_by_genre.at(g) : 0;
      if (sub.empty() && ex == 0) continue;
      rep.per_genre.push_back(summarize(g, sub, ex, opt, vocab_size));
    }
  }
  return rep;
}

}  // namespace detail

// Method vs method on items annotated by both. JSD compares the minority-filtered,
// renormalized vote distributions; JSD_flat compares uniform distributions over
// the surviving sub-labels.
inline AgreementReport compare_methods(const Corpus& corpus, Method a, Method b, const AgreementOptions& opt = {}) {
  if (!corpus.has_method(a) || !corpus.has_method(b))
    throw Error(ErrorCode::missing_method, "corpus lacks votes for one of the compared methods");
  const auto size = corpus.vocab().distribution_size();
  std::vector<detail::PairedItem> items;
  std::map<std::string, std::size_t> excluded;
  for (const auto& item : corpus.items()) {
    const auto* va = corpus.votes_for(item.item_id, a);
    const auto* vb = corpus.votes_for(item.item_id, b);
    if (!va || !vb) continue;
    auto sa = try_filter_minority(*va, opt.minority);
    auto sb = try_filter_minority(*vb, opt.minority);
    if (!sa || !sb) {
      ++excluded[item.genre];
      continue;
    }
    detail::PairedItem p{item.genre, sa->labels, sb->labels, std::nullopt};
    p.jsd = jsd(filtered_distribution(*va, size, opt.minority), filtered_distribution(*vb, size, opt.minority),
                opt.log_base);
    items.push_back(std::move(p));
  }
  return detail::build_report(std::string(to_string(a)), std::string(to_string(b)), items, excluded, corpus.genres(),
                              opt, size);
}

// Crowd method vs reference labels on items carrying a reference.
inline AgreementReport compare_with_reference(const Corpus& corpus, Method m, const AgreementOptions& opt = {}) {
  if (!corpus.has_reference()) throw Error(ErrorCode::no_reference, "corpus has no reference labels");
  if (!corpus.has_method(m)) throw Error(ErrorCode::missing_method, "corpus lacks votes for the method");
  const auto size = corpus.vocab().distribution_size();
  std::vector<detail::PairedItem> items;
  std::map<std::string, std::size_t> excluded;
  for (const auto& item : corpus.items()) {
    if (!item.reference) continue;
    const auto* vs = corpus.votes_for(item.item_id, m);
    if (!vs) {
      ++excluded[item.genre];
      continue;
    }
    auto sub = try_filter_minority(*vs, opt.minority);
    if (!sub) {
      ++excluded[item.genre];
      continue;
    }
    items.push_back({item.genre, sub->labels, *item.reference, std::nullopt});
  }
  return detail::build_report(std::string(to_string(m)), "reference", items, excluded, corpus.genres(), opt, size);
}

struct GenreEntropy {
  std::string genre;
  std::size_t n_items = 0;
  double mean_entropy = 0.0;
};

// Mean unfiltered-vote entropy per genre, plus an "all" row last.
inline std::vector<GenreEntropy> entropy_by_genre(const Corpus& corpus, Method m) {
  const int base = corpus.vocab().entropy_base();
  std::vector<GenreEntropy> out;
  GenreEntropy all{"all", 0, 0.0};
  for (const auto& g : corpus.genres()) {
    GenreEntropy row{g, 0, 0.0};
    for (const auto& item : corpus.items()) {
      if (item.genre != g) continue;
      const auto* vs = corpus.votes_for(item.item_id, m);
      if (!vs || vs->total() == 0) continue;
      const double h = entropy(*vs, base);
      row.mean_entropy += h;
      ++row.n_items;
      all.mean_entropy += h;
      ++all.n_items;
    }
    if (row.n_items == 0) continue;
    row.mean_entropy /= static_cast<double>(row.n_items);
    out.push_back(row);
  }
  if (all.n_items) all.mean_entropy /= static_cast<double>(all.n_items);
  out.push_back(all);
  return out;
}

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 1e-300 || syy <= 1e-300) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct EntropyJsdPoint {
  std::string item_id;
  std::string genre;
  double entropy = 0.0;
  double jsd_flat = 0.0;
};

struct EntropyJsdCorrelation {
  std::optional<double> r;  // nullopt when either series has zero variance
  std::vector<EntropyJsdPoint> series;
};

inline EntropyJsdCorrelation correlate(std::vector<EntropyJsdPoint> series) {
  EntropyJsdCorrelation out;
  std::vector<double> x, y;
  for (const auto& p : series) x.push_back(p.entropy), y.push_back(p.jsd_flat);
  out.r = pearson(x, y);
  out.series = std::move(series);
  return out;
}

inline EntropyJsdCorrelation entropy_jsd_correlation(const Corpus& corpus, Method m, const MinorityRule& rule = {},
                                                     LogBase base = LogBase::two) {
  if (!corpus.has_reference()) throw Error(ErrorCode::no_reference, "corpus has no reference labels");
  const auto size = corpus.vocab().distribution_size();
  std::vector<EntropyJsdPoint> series;
  for (const auto& item : corpus.items()) {
    if (!item.reference) continue;
    const auto* vs = corpus.votes_for(item.item_id, m);
    if (!vs || vs->total() == 0) continue;
    auto sub = try_filter_minority(*vs, rule);
    if (!sub) continue;
    series.push_back({item.item_id, item.genre, entropy(*vs, corpus.vocab().entropy_base()),
                      jsd_flat(sub->labels, *item.reference, size, base)});
  }
  return correlate(std::move(series));
}

}  // namespace discorel
