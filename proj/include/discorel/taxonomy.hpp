#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "discorel/embedded_data.hpp"
#include "discorel/error.hpp"
#include "discorel/text.hpp"

namespace discorel {

enum class Level1 { temporal, contingency, comparison, expansion, special };
enum class Direction { arg1, arg2, symmetric };

inline std::string_view to_string(Level1 l) {
  switch (l) {
    case Level1::temporal: return "temporal";
    case Level1::contingency: return "contingency";
    case Level1::comparison: return "comparison";
    case Level1::expansion: return "expansion";
    case Level1::special: return "special";
  }
  return "?";
}

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::arg1: return "arg1";
    case Direction::arg2: return "arg2";
    case Direction::symmetric: return "symmetric";
  }
  return "?";
}

// Index of a label in the vocabulary's fixed ordering. Vectors over the
// vocabulary are addressed by this index.
struct LabelId {
  std::size_t value = 0;
  friend auto operator<=>(const LabelId&, const LabelId&) = default;
};

struct Sense {
  std::string id;
  Level1 level1 = Level1::special;
  std::string level2;                  // empty for special labels
  std::optional<Direction> direction;  // nullopt for special labels
  LabelId index;

  bool is_special() const { return level1 == Level1::special; }
  friend bool operator==(const Sense& a, const Sense& b) { return a.id == b.id; }
};

// Flat label vocabulary plus the PDTB 3.0 hierarchy above it.
//
// Two size constants live here on purpose: entropy is computed with
// logarithm base `entropy_base` (29) while classifier targets are normalized
// over `distribution_size()` labels (30).
class SenseVocabulary {
 public:
  static SenseVocabulary from_tsv(std::string_view contents, int entropy_base = 29) {
    SenseVocabulary v;
    v.entropy_base_ = entropy_base;
    v.version_ = text::content_version(contents);
    int line_no = 0;
    for (const auto& raw : text::split_lines(contents)) {
      ++line_no;
      auto line = text::trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto cols = text::split(line, '\t');
      if (cols.size() != 4)
        throw Error(ErrorCode::parse_error,
                    "taxonomy line " + std::to_string(line_no) + ": expected 4 tab-separated columns");
      Sense s;
      s.id = text::lower(text::trim(cols[0]));
      s.level1 = parse_level1(cols[1], line_no);
      s.index = LabelId{v.senses_.size()};
      auto l2 = text::lower(text::trim(cols[2]));
      auto dir = text::lower(text::trim(cols[3]));
      if (s.level1 == Level1::special) {
        if (l2 != "-" || dir != "-")
          throw Error(ErrorCode::parse_error,
                      "taxonomy line " + std::to_string(line_no) + ": special labels take no level2/direction");
      } else {
        s.level2 = l2;
        if (dir == "arg1") s.direction = Direction::arg1;
        else if (dir == "arg2") s.direction = Direction::arg2;
        else if (dir == "symmetric") s.direction = Direction::symmetric;
        else
          throw Error(ErrorCode::parse_error,
                      "taxonomy line " + std::to_string(line_no) + ": bad direction '" + dir + "'");
        Direction implied = text::starts_with(s.id, "arg1-as-")   ? Direction::arg1
                            : text::starts_with(s.id, "arg2-as-") ? Direction::arg2
                                                                  : Direction::symmetric;
        if (*s.direction != implied)
          throw Error(ErrorCode::parse_error, "taxonomy line " + std::to_string(line_no) +
                                                  ": direction disagrees with id prefix for " + s.id);
      }
      if (v.by_id_.count(s.id))
        throw Error(ErrorCode::parse_error, "taxonomy: duplicate label " + s.id);
      v.by_id_.emplace(s.id, s.index);
      v.senses_.push_back(std::move(s));
    }
    if (v.senses_.empty()) throw Error(ErrorCode::parse_error, "taxonomy: no labels");
    for (const auto& s : v.senses_) {
      auto group = s.is_special() ? s.id : s.level2;
      auto& members = v.level2_groups_[group];
      members.push_back(s.index);
      if (std::find(v.level2_order_.begin(), v.level2_order_.end(), group) == v.level2_order_.end())
        v.level2_order_.push_back(group);
    }
    return v;
  }

  static SenseVocabulary from_file(const std::string& path, int entropy_base = 29) {
    return from_tsv(text::read_file(path), entropy_base);
  }

  // The shipped PDTB 3.0 30-label vocabulary.
  static const SenseVocabulary& pdtb3() {
    static const SenseVocabulary v = from_tsv(embedded::taxonomy_tsv);
    return v;
  }

  std::size_t distribution_size() const { return senses_.size(); }
  int entropy_base() const { return entropy_base_; }
  const std::string& version() const { return version_; }

  const std::vector<Sense>& labels() const { return senses_; }
  const Sense& at(LabelId id) const { return senses_.at(id.value); }
  const Sense& operator[](LabelId id) const { return senses_[id.value]; }

  std::optional<LabelId> find(std::string_view canonical_id) const {
    auto it = by_id_.find(std::string(canonical_id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  // Lowercases, trims, resolves aliases. Dotted hierarchical paths are not
  // accepted; the vocabulary is flat.
  const Sense& parse(std::string_view raw) const {
    auto key = text::lower(text::trim(raw));
    if (key.empty()) throw Error(ErrorCode::unknown_label, "empty label");
    for (char& c : key)
      if (c == '_' || c == ' ') c = '-';
    if (auto id = find(key)) return at(*id);
    if (auto alias = resolve_alias(key)) {
      if (auto id = find(*alias)) return at(*id);
    }
    throw Error(ErrorCode::unknown_label, "'" + std::string(raw) + "' is not in the vocabulary");
  }

  LabelId parse_id(std::string_view raw) const { return parse(raw).index; }

  // Level-2 class for confusion matrices; special labels are their own group.
  const std::string& level2_of(LabelId id) const {
    const auto& s = at(id);
    return s.is_special() ? s.id : s.level2;
  }

  // Level-2 classes in first-appearance order of the label list.
  const std::vector<std::string>& level2_classes() const { return level2_order_; }
  const std::map<std::string, std::vector<LabelId>>& level2_groups() const { return level2_groups_; }

  // Strips belief / speech-act markers and returns the general sense id.
  std::string merge_belief_speechact(std::string_view raw) const {
    auto key = text::lower(text::trim(raw));
    static constexpr std::string_view markers[] = {
        "+speech-act", "+speechact", "-speech-act", "-speechact", "_speechact", " speech-act",
        "+belief",     "-belief",    "_belief",     " belief"};
    bool stripped = true;
    while (stripped) {
      stripped = false;
      for (auto m : markers) {
        if (key.size() > m.size() && key.compare(key.size() - m.size(), m.size(), m) == 0) {
          key.erase(key.size() - m.size());
          key = std::string(text::trim(key));
          stripped = true;
        }
      }
    }
    return parse(key).id;
  }

 private:
  static Level1 parse_level1(std::string_view raw, int line_no) {
    auto s = text::lower(text::trim(raw));
    if (s == "temporal") return Level1::temporal;
    if (s == "contingency") return Level1::contingency;
    if (s == "comparison") return Level1::comparison;
    if (s == "expansion") return Level1::expansion;
    if (s == "special") return Level1::special;
    throw Error(ErrorCode::parse_error,
                "taxonomy line " + std::to_string(line_no) + ": bad level1 '" + s + "'");
  }

  static std::optional<std::string> resolve_alias(const std::string& key) {
    static const std::unordered_map<std::string, std::string> suffix_aliases = {
        {"substitution", "subst"},     {"exception", "excpt"},
        {"condition", "cond"},         {"negative-condition", "negcond"},
        {"negcondition", "negcond"},   {"purpose", "goal"},
        {"except", "excpt"},           {"sub", "subst"},
    };
    static const std::unordered_map<std::string, std::string> whole_aliases = {
        {"no-rel", "norel"},          {"norelation", "norel"},  {"no-relation", "norel"},
        {"different-con", "differentcon"}, {"differentconnective", "differentcon"},
        {"concurrent", "synchronous"},
    };
    if (auto it = whole_aliases.find(key); it != whole_aliases.end()) return it->second;
    for (std::string_view prefix : {"arg1-as-", "arg2-as-"}) {
      if (text::starts_with(key, prefix)) {
        auto rest = key.substr(prefix.size());
        if (auto it = suffix_aliases.find(rest); it != suffix_aliases.end())
          return std::string(prefix) + it->second;
      }
    }
    return std::nullopt;
  }

  std::vector<Sense> senses_;
  std::unordered_map<std::string, LabelId> by_id_;
  std::map<std::string, std::vector<LabelId>> level2_groups_;
  std::vector<std::string> level2_order_;
  int entropy_base_ = 29;
  std::string version_;
};

inline const Sense& parse_sense(std::string_view raw,
                               const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
  return vocab.parse(raw);
}

inline std::string level2_of(const Sense& sense,
                             const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
  return vocab.level2_of(sense.index);
}

inline std::string merge_belief_speechact(std::string_view raw,
                                          const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
  return vocab.merge_belief_speechact(raw);
}

}  // namespace discorel
