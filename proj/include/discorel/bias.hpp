#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "discorel/agreement.hpp"
#include "discorel/corpus.hpp"
#include "discorel/error.hpp"

namespace discorel {

// ---------------------------------------------------------------------------
// Level-2 confusion matrix
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<long>> cells;  // [row][col]

  long total() const {
    long t = 0;
    for (const auto& r : cells) t = std::accumulate(r.begin(), r.end(), t);
    return t;
  }

  std::vector<long> row_marginals() const {
    std::vector<long> out;
    for (const auto& r : cells) out.push_back(std::accumulate(r.begin(), r.end(), 0L));
    return out;
  }

  std::vector<long> col_marginals() const {
    std::vector<long> out(col_labels.size(), 0);
    for (const auto& r : cells)
      for (std::size_t c = 0; c < r.size(); ++c) out[c] += r[c];
    return out;
  }

  std::optional<std::size_t> row_index(const std::string& l) const {
    auto it = std::find(row_labels.begin(), row_labels.end(), l);
    if (it == row_labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - row_labels.begin());
  }

  std::optional<std::size_t> col_index(const std::string& l) const {
    auto it = std::find(col_labels.begin(), col_labels.end(), l);
    if (it == col_labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - col_labels.begin());
  }

  long at(const std::string& row, const std::string& col) const {
    auto r = row_index(row), c = col_index(col);
    return (r && c) ? cells[*r][*c] : 0;
  }

  // Sub-matrix over the given classes (missing ones dropped), e.g. the most
  // frequent level-2 classes.
  ConfusionMatrix restrict(const std::vector<std::string>& keep) const {
    ConfusionMatrix out;
    std::vector<std::size_t> rows, cols;
    for (const auto& k : keep) {
      if (auto r = row_index(k)) rows.push_back(*r), out.row_labels.push_back(k);
      if (auto c = col_index(k)) cols.push_back(*c), out.col_labels.push_back(k);
    }
    for (auto r : rows) {
      std::vector<long> row;
      for (auto c : cols) row.push_back(cells[r][c]);
      out.cells.push_back(std::move(row));
    }
    return out;
  }
};

// Every (row-method sub-label, column-method sub-label) pair of an item's two
// minority-filtered sets adds one count at their level-2 classes. Special
// labels (norel, differentcon) are left out.
inline ConfusionMatrix confusion_level2(const Corpus& corpus, Method row_method = Method::dc,
                                        Method col_method = Method::qa, const MinorityRule& rule = {}) {
  if (!corpus.has_method(row_method) || !corpus.has_method(col_method))
    throw Error(ErrorCode::missing_method, "confusion matrix needs both methods");
  const auto& vocab = corpus.vocab();
  std::map<std::pair<std::string, std::string>, long> counts;
  std::set<std::string> seen_rows, seen_cols;
  for (const auto& item : corpus.items()) {
    const auto* vr = corpus.votes_for(item.item_id, row_method);
    const auto* vc = corpus.votes_for(item.item_id, col_method);
    if (!vr || !vc) continue;
    auto sr = try_filter_minority(*vr, rule);
    auto sc = try_filter_minority(*vc, rule);
    if (!sr || !sc) continue;
    for (auto a : sr->labels) {
      if (vocab.at(a).is_special()) continue;
      for (auto b : sc->labels) {
        if (vocab.at(b).is_special()) continue;
        const auto& ra = vocab.level2_of(a);
        const auto& cb = vocab.level2_of(b);
        ++counts[{ra, cb}];
        seen_rows.insert(ra);
        seen_cols.insert(cb);
      }
    }
  }
  ConfusionMatrix m;
  for (const auto& c : vocab.level2_classes()) {
    if (seen_rows.count(c)) m.row_labels.push_back(c);
    if (seen_cols.count(c)) m.col_labels.push_back(c);
  }
  for (const auto& r : m.row_labels) {
    std::vector<long> row;
    for (const auto& c : m.col_labels) {
      auto it = counts.find({r, c});
      row.push_back(it == counts.end() ? 0 : it->second);
    }
    m.cells.push_back(std::move(row));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Chi-squared test of independence
// ---------------------------------------------------------------------------

struct ChiSquaredResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::size_t rows = 0;  // after pooling
  std::size_t cols = 0;
};

namespace detail {

// Merges every line whose marginal is below `floor` into one pooled line and
// drops empty lines. Returns, per kept output line, the input lines it sums.
inline std::vector<std::vector<std::size_t>> pool_lines(const std::vector<long>& marginals, double floor) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> pooled;
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    if (marginals[i] <= 0) continue;
    if (static_cast<double>(marginals[i]) < floor) pooled.push_back(i);
    else groups.push_back({i});
  }
  if (!pooled.empty()) groups.push_back(std::move(pooled));
  return groups;
}

}  // namespace detail

inline ChiSquaredResult chi_squared_independence(const std::vector<std::vector<long>>& cells, double pool_floor = 5.0) {
  if (cells.empty() || cells.front().empty()) throw Error(ErrorCode::degenerate_matrix, "empty matrix");
  const std::size_t nc = cells.front().size();
  std::vector<long> rm(cells.size(), 0), cm(nc, 0);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (cells[r].size() != nc) throw Error(ErrorCode::degenerate_matrix, "ragged matrix");
    for (std::size_t c = 0; c < nc; ++c) {
      if (cells[r][c] < 0) throw Error(ErrorCode::degenerate_matrix, "negative cell");
      rm[r] += cells[r][c];
      cm[c] += cells[r][c];
    }
  }
  auto rg = detail::pool_lines(rm, pool_floor);
  auto cg = detail::pool_lines(cm, pool_floor);
  if (rg.size() < 2 || cg.size() < 2)
    throw Error(ErrorCode::degenerate_matrix, "fewer than two populated rows or columns after pooling");
  std::vector<std::vector<double>> obs(rg.size(), std::vector<double>(cg.size(), 0.0));
  for (std::size_t i = 0; i < rg.size(); ++i)
    for (std::size_t j = 0; j < cg.size(); ++j)
      for (auto r : rg[i])
        for (auto c : cg[j]) obs[i][j] += static_cast<double>(cells[r][c]);
  std::vector<double> rs(rg.size(), 0.0), cs(cg.size(), 0.0);
  double n = 0.0;
  for (std::size_t i = 0; i < rg.size(); ++i)
    for (std::size_t j = 0; j < cg.size(); ++j) rs[i] += obs[i][j], cs[j] += obs[i][j], n += obs[i][j];

  ChiSquaredResult out;
  out.rows = rg.size();
  out.cols = cg.size();
  for (std::size_t i = 0; i < rg.size(); ++i) {
    for (std::size_t j = 0; j < cg.size(); ++j) {
      const double e = rs[i] * cs[j] / n;
      if (e <= 0.0) throw Error(ErrorCode::degenerate_matrix, "zero expected count");
      const double d = obs[i][j] - e;
      out.statistic += d * d / e;
    }
  }
  out.dof = static_cast<int>((rg.size() - 1) * (cg.size() - 1));
  out.p_value = boost::math::gamma_q(out.dof / 2.0, out.statistic / 2.0);
  return out;
}

inline ChiSquaredResult chi_squared_independence(const ConfusionMatrix& m, double pool_floor = 5.0) {
  return chi_squared_independence(m.cells, pool_floor);
}

// ---------------------------------------------------------------------------
// FP / FN against reference labels
// ---------------------------------------------------------------------------

struct ErrorRow {
  LabelId sense;
  int ref_count = 0;  // items whose reference contains the sense
  int fn_qa = 0, fn_dc = 0, fp_qa = 0, fp_dc = 0;

  int& fn(Method m) { return m == Method::qa ? fn_qa : fn_dc; }
  int& fp(Method m) { return m == Method::qa ? fp_qa : fp_dc; }
  int fn(Method m) const { return m == Method::qa ? fn_qa : fn_dc; }
  int fp(Method m) const { return m == Method::qa ? fp_qa : fp_dc; }
};

struct ErrorTable {
  std::vector<ErrorRow> rows;  // descending ref_count, ties in vocabulary order
  std::size_t n_items = 0;

  const ErrorRow* find(LabelId l) const {
    for (const auto& r : rows)
      if (r.sense == l) return &r;
    return nullptr;
  }

  bool all_zero() const {
    return std::all_of(rows.begin(), rows.end(),
                       [](const ErrorRow& r) { return r.fn_qa == 0 && r.fn_dc == 0 && r.fp_qa == 0 && r.fp_dc == 0; });
  }
};

// One count per (item, label): FP = crowd sub-label missing from the
// reference, FN = reference label missing from the crowd sub-labels.
inline ErrorTable fp_fn(const Corpus& corpus, std::initializer_list<Method> methods, const MinorityRule& rule = {}) {
  if (!corpus.has_reference()) throw Error(ErrorCode::no_reference, "corpus has no reference labels");
  const auto size = corpus.vocab().distribution_size();
  std::vector<ErrorRow> rows(size);
  for (std::size_t i = 0; i < size; ++i) rows[i].sense = LabelId{i};
  ErrorTable table;
  for (const auto& item : corpus.items()) {
    if (!item.reference) continue;
    ++table.n_items;
    for (auto l : *item.reference) ++rows[l.value].ref_count;
    for (auto m : methods) {
      const auto* vs = corpus.votes_for(item.item_id, m);
      if (!vs) continue;
      auto sub = try_filter_minority(*vs, rule);
      if (!sub) continue;
      for (auto l : sub->labels)
        if (!item.reference->count(l)) ++rows[l.value].fp(m);
      for (auto l : *item.reference)
        if (!sub->labels.count(l)) ++rows[l.value].fn(m);
    }
  }
  std::erase_if(rows, [](const ErrorRow& r) {
    return r.ref_count == 0 && r.fn_qa == 0 && r.fn_dc == 0 && r.fp_qa == 0 && r.fp_dc == 0;
  });
  std::stable_sort(rows.begin(), rows.end(), [](const ErrorRow& a, const ErrorRow& b) { return a.ref_count > b.ref_count; });
  table.rows = std::move(rows);
  return table;
}

inline ErrorTable fp_fn(const Corpus& corpus, Method m, const MinorityRule& rule = {}) {
  return fp_fn(corpus, {m}, rule);
}

inline ErrorTable error_table(const Corpus& corpus, const MinorityRule& rule = {}) {
  return fp_fn(corpus, {Method::qa, Method::dc}, rule);
}

// ---------------------------------------------------------------------------
// Bias-aware aggregation
// ---------------------------------------------------------------------------

enum class AggregationMode { replace, merge };

inline AggregationMode parse_aggregation_mode(std::string_view raw) {
  auto s = text::lower(text::trim(raw));
  if (s == "replace") return AggregationMode::replace;
  if (s == "merge") return AggregationMode::merge;
  throw Error(ErrorCode::invalid_argument, "mode must be replace or merge");
}

struct AggregationPolicy {
  Method base_method = Method::dc;
  LabelSet reannotate_triggers;
  Method replacement_method = Method::qa;
  AggregationMode mode = AggregationMode::replace;

  // Default policy: DC items carrying a result sub-label are re-annotated with QA.
  static AggregationPolicy result_to_qa(const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
    AggregationPolicy p;
    p.reannotate_triggers.insert(vocab.parse_id("result"));
    return p;
  }
};

struct AggregatedItem {
  std::string item_id;
  std::string genre;
  LabelSet before;
  LabelSet after;
  bool reannotated = false;
};

struct AggregationResult {
  std::vector<AggregatedItem> items;
  std::size_t n_reannotated = 0;
  std::size_t n_missing_replacement = 0;  // triggered but no usable replacement annotation
  std::size_t n_evaluated = 0;            // items with a reference
  double partial_before = 0.0, partial_after = 0.0;
  double full_before = 0.0, full_after = 0.0;
};

inline AggregationResult aggregate_bias_aware(const Corpus& corpus, const AggregationPolicy& policy,
                                              std::optional<std::string> subset_genre = std::nullopt,
                                              const MinorityRule& rule = {}) {
  if (!corpus.has_reference()) throw Error(ErrorCode::no_reference, "aggregation is evaluated against reference labels");
  for (auto t : policy.reannotate_triggers)
    if (t.value >= corpus.vocab().distribution_size())
      throw Error(ErrorCode::invalid_argument, "trigger outside the vocabulary");
  AggregationResult out;
  std::vector<LabelSetPair> before, after;
  for (const auto& item : corpus.items()) {
    if (subset_genre && item.genre != *subset_genre) continue;
    const auto* vb = corpus.votes_for(item.item_id, policy.base_method);
    if (!vb) continue;
    auto base = try_filter_minority(*vb, rule);
    if (!base) continue;
    AggregatedItem a{item.item_id, item.genre, base->labels, base->labels, false};
    bool triggered = std::any_of(base->labels.begin(), base->labels.end(),
                                 [&](LabelId l) { return policy.reannotate_triggers.count(l) > 0; });
    if (triggered) {
      const auto* vr = corpus.votes_for(item.item_id, policy.replacement_method);
      auto repl = vr ? try_filter_minority(*vr, rule) : std::nullopt;
      if (repl) {
        a.reannotated = true;
        ++out.n_reannotated;
        if (policy.mode == AggregationMode::replace) a.after = repl->labels;
        else a.after.insert(repl->labels.begin(), repl->labels.end());
      } else {
        ++out.n_missing_replacement;
      }
    }
    if (item.reference) {
      before.emplace_back(a.before, *item.reference);
      after.emplace_back(a.after, *item.reference);
    }
    out.items.push_back(std::move(a));
  }
  out.n_evaluated = before.size();
  if (!before.empty()) {
    out.partial_before = partial_rate(before);
    out.partial_after = partial_rate(after);
    out.full_before = full_rate(before);
    out.full_after = full_rate(after);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-genre level-2 profile
// ---------------------------------------------------------------------------

struct GenreProfile {
  std::string genre;
  std::vector<std::string> classes;  // vocabulary level-2 order
  std::vector<long> counts;
  long total = 0;

  double share(const std::string& cls) const {
    auto it = std::find(classes.begin(), classes.end(), cls);
    if (it == classes.end() || total == 0) return 0.0;
    return static_cast<double>(counts[static_cast<std::size_t>(it - classes.begin())]) / static_cast<double>(total);
  }
};

// Level-2 counts of every sub-label, per genre. Genres without annotations
// for the method produce no row.
inline std::vector<GenreProfile> genre_label_profile(const Corpus& corpus, Method m, const MinorityRule& rule = {}) {
  const auto& vocab = corpus.vocab();
  const auto& classes = vocab.level2_classes();
  std::vector<GenreProfile> out;
  for (const auto& g : corpus.genres()) {
    GenreProfile p{g, classes, std::vector<long>(classes.size(), 0), 0};
    for (const auto& item : corpus.items()) {
      if (item.genre != g) continue;
      const auto* vs = corpus.votes_for(item.item_id, m);
      if (!vs) continue;
      auto sub = try_filter_minority(*vs, rule);
      if (!sub) continue;
      for (auto l : sub->labels) {
        auto idx = static_cast<std::size_t>(std::find(classes.begin(), classes.end(), vocab.level2_of(l)) - classes.begin());
        ++p.counts[idx];
        ++p.total;
      }
    }
    if (p.total > 0) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace discorel
