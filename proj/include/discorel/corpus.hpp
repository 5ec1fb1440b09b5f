#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "discorel/error.hpp"
#include "discorel/taxonomy.hpp"
#include "discorel/text.hpp"

namespace discorel {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using LabelSet = std::set<LabelId>;

enum class Method { dc, qa };

inline std::string_view to_string(Method m) { return m == Method::dc ? "dc" : "qa"; }

inline Method parse_method(std::string_view raw) {
  auto s = text::lower(text::trim(raw));
  if (s == "dc") return Method::dc;
  if (s == "qa") return Method::qa;
  throw Error(ErrorCode::invalid_argument, "method must be dc or qa, got '" + s + "'");
}

namespace genre {
inline constexpr std::string_view europarl = "europarl";
inline constexpr std::string_view novel = "novel";
inline constexpr std::string_view wikipedia = "wikipedia";
inline constexpr std::string_view pdtb = "pdtb";
inline constexpr std::string_view canonical[] = {europarl, novel, wikipedia, pdtb};

inline bool is_canonical(std::string_view g) {
  return std::find(std::begin(canonical), std::end(canonical), g) != std::end(canonical);
}
}  // namespace genre

struct RelationItem {
  std::string item_id;
  std::string genre;
  std::string s1;
  std::string s2;
  std::optional<std::string> context;
  std::optional<LabelSet> reference;
};

struct Vote {
  std::string item_id;
  Method method = Method::dc;
  std::string worker_id;
  LabelId sense;
  std::optional<json> raw;
};

// Per item x method multiset of worker votes.
class VoteSet {
 public:
  VoteSet() = default;
  VoteSet(std::string item_id, Method method) : item_id_(std::move(item_id)), method_(method) {}

  void add(LabelId sense, int n = 1) {
    if (n <= 0) return;
    counts_[sense] += n;
    total_ += n;
  }

  const std::string& item_id() const { return item_id_; }
  Method method() const { return method_; }
  const std::map<LabelId, int>& counts() const { return counts_; }
  int total() const { return total_; }
  int count(LabelId sense) const {
    auto it = counts_.find(sense);
    return it == counts_.end() ? 0 : it->second;
  }

  friend bool operator==(const VoteSet& a, const VoteSet& b) {
    return a.item_id_ == b.item_id_ && a.method_ == b.method_ && a.counts_ == b.counts_;
  }

 private:
  std::string item_id_;
  Method method_ = Method::dc;
  std::map<LabelId, int> counts_;
  int total_ = 0;
};

enum class DistributionTransform { none, minority_filtered, flattened, softmax };

struct LabelDistribution {
  std::vector<int> counts;
  std::vector<double> probs;
  DistributionTransform transform = DistributionTransform::none;

  std::size_t size() const { return probs.size(); }
};

struct SubLabelSet {
  LabelSet labels;
  double removed_mass = 0.0;  // fraction of votes dropped as minority

  bool empty() const { return labels.empty(); }
  std::size_t size() const { return labels.size(); }
};

// Minority rule. Default is the absolute count rule (>= 2 votes); setting
// `min_fraction` switches to a share-of-total rule instead.
struct MinorityRule {
  int min_votes = 2;
  std::optional<double> min_fraction;

  bool keeps(int count, int total) const {
    if (min_fraction) return total > 0 && static_cast<double>(count) / total >= *min_fraction - 1e-12;
    return count >= min_votes;
  }
};

// Returns surviving labels, or nullopt when every label is minority.
inline std::optional<SubLabelSet> try_filter_minority(const VoteSet& vs, const MinorityRule& rule = {}) {
  if (vs.total() < 1) throw Error(ErrorCode::invalid_argument, "vote set for " + vs.item_id() + " is empty");
  SubLabelSet out;
  int kept = 0;
  for (auto [label, n] : vs.counts()) {
    if (rule.keeps(n, vs.total())) {
      out.labels.insert(label);
      kept += n;
    }
  }
  out.removed_mass = 1.0 - static_cast<double>(kept) / vs.total();
  if (out.labels.empty()) return std::nullopt;
  return out;
}

inline SubLabelSet filter_minority(const VoteSet& vs, int min_votes = 2) {
  auto r = try_filter_minority(vs, MinorityRule{min_votes, std::nullopt});
  if (!r) throw Error(ErrorCode::all_minority, "no label of " + vs.item_id() + " reaches " + std::to_string(min_votes) + " votes");
  return *r;
}

inline SubLabelSet filter_minority(const VoteSet& vs, const MinorityRule& rule) {
  auto r = try_filter_minority(vs, rule);
  if (!r) throw Error(ErrorCode::all_minority, "no label of " + vs.item_id() + " survives minority filtering");
  return *r;
}

inline LabelDistribution raw_distribution(const VoteSet& vs, std::size_t size) {
  LabelDistribution d;
  d.counts.assign(size, 0);
  d.probs.assign(size, 0.0);
  for (auto [label, n] : vs.counts()) d.counts.at(label.value) = n;
  if (vs.total() > 0)
    for (std::size_t i = 0; i < size; ++i) d.probs[i] = static_cast<double>(d.counts[i]) / vs.total();
  return d;
}

// Counts of surviving labels only, renormalized.
inline LabelDistribution filtered_distribution(const VoteSet& vs, std::size_t size, const MinorityRule& rule = {}) {
  LabelDistribution d;
  d.transform = DistributionTransform::minority_filtered;
  d.counts.assign(size, 0);
  d.probs.assign(size, 0.0);
  int kept = 0;
  for (auto [label, n] : vs.counts()) {
    if (rule.keeps(n, vs.total())) {
      d.counts.at(label.value) = n;
      kept += n;
    }
  }
  if (kept > 0)
    for (std::size_t i = 0; i < size; ++i) d.probs[i] = static_cast<double>(d.counts[i]) / kept;
  return d;
}

// Uniform distribution over the members of a label set.
inline LabelDistribution flatten(const LabelSet& labels, std::size_t size) {
  if (labels.empty()) throw Error(ErrorCode::empty_set, "cannot flatten an empty label set");
  LabelDistribution d;
  d.transform = DistributionTransform::flattened;
  d.counts.assign(size, 0);
  d.probs.assign(size, 0.0);
  const double p = 1.0 / static_cast<double>(labels.size());
  for (auto l : labels) {
    d.counts.at(l.value) = 1;
    d.probs[l.value] = p;
  }
  return d;
}

inline LabelDistribution flatten(const SubLabelSet& labels, std::size_t size) { return flatten(labels.labels, size); }

struct LoadWarning {
  int line = 0;
  std::string message;
};

class Corpus {
 public:
  explicit Corpus(const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) : vocab_(&vocab) {}

  const SenseVocabulary& vocab() const { return *vocab_; }

  void add_item(RelationItem item) {
    if (item.item_id.empty()) throw Error(ErrorCode::parse_error, "item without item_id");
    if (item.s1.empty() || item.s2.empty())
      throw Error(ErrorCode::parse_error, "item " + item.item_id + " has an empty argument");
    if (item.reference && item.reference->empty())
      throw Error(ErrorCode::parse_error, "item " + item.item_id + " has an empty reference set");
    if (index_.count(item.item_id)) throw Error(ErrorCode::parse_error, "duplicate item " + item.item_id);
    index_.emplace(item.item_id, items_.size());
    items_.push_back(std::move(item));
  }

  void add_vote(Vote v) {
    auto it = index_.find(v.item_id);
    if (it == index_.end()) throw Error(ErrorCode::dangling_vote, "vote references unknown item " + v.item_id);
    auto key = std::make_tuple(v.item_id, v.method, v.worker_id);
    if (!voters_.insert(key).second)
      throw Error(ErrorCode::duplicate_worker_vote, "worker " + v.worker_id + " voted twice on " + v.item_id +
                                                        " (" + std::string(to_string(v.method)) + ")");
    auto& vs = votesets_[{it->second, v.method}];
    if (vs.total() == 0) vs = VoteSet(v.item_id, v.method);
    vs.add(v.sense);
    votes_.push_back(std::move(v));
  }

  const std::vector<RelationItem>& items() const { return items_; }
  const std::vector<Vote>& votes() const { return votes_; }

  const RelationItem* find_item(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &items_[it->second];
  }

  const VoteSet* votes_for(std::string_view item_id, Method m) const {
    auto it = index_.find(std::string(item_id));
    if (it == index_.end()) return nullptr;
    auto vs = votesets_.find({it->second, m});
    return vs == votesets_.end() ? nullptr : &vs->second;
  }

  bool has_method(Method m) const {
    return std::any_of(votesets_.begin(), votesets_.end(), [m](const auto& kv) { return kv.first.second == m; });
  }

  bool has_reference() const {
    return std::any_of(items_.begin(), items_.end(), [](const auto& i) { return i.reference.has_value(); });
  }

  std::vector<std::string> genres() const {
    std::vector<std::string> out;
    for (auto g : genre::canonical)
      if (std::any_of(items_.begin(), items_.end(), [g](const auto& i) { return i.genre == g; }))
        out.emplace_back(g);
    for (const auto& i : items_)
      if (std::find(out.begin(), out.end(), i.genre) == out.end()) out.push_back(i.genre);
    return out;
  }

  std::size_t count_genre(std::string_view g) const {
    return static_cast<std::size_t>(
        std::count_if(items_.begin(), items_.end(), [g](const auto& i) { return i.genre == g; }));
  }

  // Copy restricted to one genre (votes carried along).
  Corpus subset(std::string_view g) const {
    Corpus out(*vocab_);
    for (const auto& i : items_)
      if (i.genre == g) out.add_item(i);
    for (const auto& v : votes_)
      if (out.find_item(v.item_id)) out.add_vote(v);
    return out;
  }

  // --- serialization -------------------------------------------------------

  ordered_json item_to_json(const RelationItem& i) const {
    ordered_json j;
    j["item_id"] = i.item_id;
    j["genre"] = i.genre;
    j["s1"] = i.s1;
    j["s2"] = i.s2;
    if (i.context) j["context"] = *i.context;
    if (i.reference) {
      auto arr = ordered_json::array();
      for (auto l : *i.reference) arr.push_back(vocab_->at(l).id);
      j["reference"] = arr;
    }
    return j;
  }

  ordered_json vote_to_json(const Vote& v) const {
    ordered_json j;
    j["item_id"] = v.item_id;
    j["method"] = to_string(v.method);
    j["worker_id"] = v.worker_id;
    j["sense"] = vocab_->at(v.sense).id;
    if (v.raw) j["raw"] = ordered_json::parse(v.raw->dump());
    return j;
  }

  std::string serialize_items() const {
    std::string out;
    for (const auto& i : items_) out += item_to_json(i).dump() + "\n";
    return out;
  }

  std::string serialize_votes() const {
    std::string out;
    for (const auto& v : votes_) out += vote_to_json(v).dump() + "\n";
    return out;
  }

  static RelationItem parse_item(const json& j, const SenseVocabulary& vocab) {
    RelationItem i;
    i.item_id = j.at("item_id").get<std::string>();
    i.genre = text::lower(text::trim(j.value("genre", std::string{})));
    i.s1 = j.at("s1").get<std::string>();
    i.s2 = j.at("s2").get<std::string>();
    if (j.contains("context") && !j["context"].is_null()) i.context = j["context"].get<std::string>();
    if (j.contains("reference") && !j["reference"].is_null()) {
      LabelSet ref;
      for (const auto& l : j["reference"]) ref.insert(vocab.parse_id(vocab.merge_belief_speechact(l.get<std::string>())));
      i.reference = std::move(ref);
    }
    return i;
  }

  static Vote parse_vote(const json& j, const SenseVocabulary& vocab) {
    Vote v;
    v.item_id = j.at("item_id").get<std::string>();
    v.method = parse_method(j.at("method").get<std::string>());
    v.worker_id = j.at("worker_id").get<std::string>();
    v.sense = vocab.parse_id(vocab.merge_belief_speechact(j.at("sense").get<std::string>()));
    if (j.contains("raw") && !j["raw"].is_null()) v.raw = j["raw"];
    return v;
  }

  static Corpus load(std::istream& items, std::istream& votes, const SenseVocabulary& vocab = SenseVocabulary::pdtb3(),
                     std::vector<LoadWarning>* warnings = nullptr) {
    Corpus c(vocab);
    for_each_record(items, "items", [&](const json& j, int line) {
      auto item = parse_item(j, vocab);
      if (!genre::is_canonical(item.genre) && warnings)
        warnings->push_back({line, "non-canonical genre '" + item.genre + "' for item " + item.item_id});
      c.add_item(std::move(item));
    });
    for_each_record(votes, "votes", [&](const json& j, int) { c.add_vote(parse_vote(j, vocab)); });
    return c;
  }

  static Corpus load_strings(std::string_view items, std::string_view votes,
                             const SenseVocabulary& vocab = SenseVocabulary::pdtb3(),
                             std::vector<LoadWarning>* warnings = nullptr) {
    std::istringstream is(std::string{items}), vs(std::string{votes});
    return load(is, vs, vocab, warnings);
  }

  static Corpus load_files(const std::string& items_path, const std::string& votes_path,
                           const SenseVocabulary& vocab = SenseVocabulary::pdtb3(),
                           std::vector<LoadWarning>* warnings = nullptr) {
    return load_strings(text::read_file(items_path), text::read_file(votes_path), vocab, warnings);
  }

  // Loads several vote files into one corpus (e.g. separate DC and QA exports).
  static Corpus load_files(const std::string& items_path, const std::vector<std::string>& vote_paths,
                           const SenseVocabulary& vocab = SenseVocabulary::pdtb3(),
                           std::vector<LoadWarning>* warnings = nullptr) {
    std::string all;
    for (const auto& p : vote_paths) {
      all += text::read_file(p);
      if (!all.empty() && all.back() != '\n') all.push_back('\n');
    }
    return load_strings(text::read_file(items_path), all, vocab, warnings);
  }

 private:
  template <typename F>
  static void for_each_record(std::istream& in, std::string_view what, F&& f) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto t = text::trim(line);
      if (t.empty()) continue;
      json j;
      try {
        j = json::parse(t);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
      }
      try {
        f(j, line_no);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
      } catch (const Error& e) {
        if (e.code() == ErrorCode::dangling_vote || e.code() == ErrorCode::duplicate_worker_vote)
          throw Error(e.code(), std::string(what) + " line " + std::to_string(line_no) + ": " + e.message());
        throw Error(ErrorCode::parse_error, std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  const SenseVocabulary* vocab_;
  std::vector<RelationItem> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Vote> votes_;
  std::map<std::pair<std::size_t, Method>, VoteSet> votesets_;
  std::set<std::tuple<std::string, Method, std::string>> voters_;
};

struct SubLabelStats {
  double mean = 0.0;
  std::size_t n_items = 0;       // items with at least one surviving label
  std::size_t n_all_minority = 0;
  double mean_removed_mass = 0.0;  // over every item with votes
};

inline SubLabelStats sublabels_per_item(const Corpus& corpus, Method m, const MinorityRule& rule = {}) {
  SubLabelStats s;
  std::size_t total = 0, with_votes = 0;
  double removed = 0.0;
  for (const auto& item : corpus.items()) {
    const auto* vs = corpus.votes_for(item.item_id, m);
    if (!vs || vs->total() == 0) continue;
    ++with_votes;
    auto sub = try_filter_minority(*vs, rule);
    if (!sub) {
      ++s.n_all_minority;
      removed += 1.0;
      continue;
    }
    removed += sub->removed_mass;
    total += sub->size();
    ++s.n_items;
  }
  if (s.n_items > 0) s.mean = static_cast<double>(total) / static_cast<double>(s.n_items);
  if (with_votes > 0) s.mean_removed_mass = removed / static_cast<double>(with_votes);
  return s;
}

inline double reference_labels_per_item(const Corpus& corpus) {
  std::size_t n = 0, total = 0;
  for (const auto& item : corpus.items())
    if (item.reference) ++n, total += item.reference->size();
  return n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
}

}  // namespace discorel
