#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "discorel/corpus.hpp"
#include "discorel/embedded_data.hpp"
#include "discorel/error.hpp"
#include "discorel/taxonomy.hpp"
#include "discorel/text.hpp"

namespace discorel::qa {

enum class Side { s1, s2 };

inline std::string_view to_string(Side s) { return s == Side::s1 ? "s1" : "s2"; }

inline Side parse_side(std::string_view raw) {
  auto s = text::lower(text::trim(raw));
  if (s == "s1" || s == "arg1") return Side::s1;
  if (s == "s2" || s == "arg2") return Side::s2;
  throw Error(ErrorCode::invalid_argument, "question_source must be s1 or s2, got '" + s + "'");
}

inline Side other(Side s) { return s == Side::s1 ? Side::s2 : Side::s1; }

// Which sentence carries the role the directed sense names.
enum class RoleSide { answer, question };

struct PrefixEntry {
  std::string prefix;
  std::string family;
  bool directed = false;
  std::optional<RoleSide> rule;
  LabelId sense_if_arg1;
  LabelId sense_if_arg2;
  bool reconstructed = false;
};

// Canonical lookup form of a question prefix: case-folded, whitespace
// collapsed, trailing "?" and ellipsis dropped.
inline std::string normalize_prefix(std::string_view raw) {
  std::string out;
  for (auto& w : text::words(text::lower(raw))) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  while (!out.empty() && (out.back() == '?' || out.back() == '.' || out.back() == ' ')) out.pop_back();
  return out;
}

class PrefixInventory {
 public:
  static PrefixInventory from_tsv(std::string_view contents, const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
    PrefixInventory inv;
    inv.vocab_ = &vocab;
    inv.version_ = text::content_version(contents);
    int line_no = 0;
    for (const auto& raw : text::split_lines(contents)) {
      ++line_no;
      auto line = text::trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto cols = text::split(line, '\t');
      auto where = "inventory line " + std::to_string(line_no);
      if (cols.size() < 6) throw Error(ErrorCode::parse_error, where + ": expected at least 6 columns");
      PrefixEntry e;
      e.prefix = std::string(text::trim(cols[0]));
      e.family = text::lower(text::trim(cols[1]));
      auto directed = text::lower(text::trim(cols[2]));
      if (directed != "yes" && directed != "no") throw Error(ErrorCode::parse_error, where + ": directed must be yes/no");
      e.directed = directed == "yes";
      auto rule = text::lower(text::trim(cols[3]));
      if (e.directed) {
        if (rule == "answer") e.rule = RoleSide::answer;
        else if (rule == "question") e.rule = RoleSide::question;
        else throw Error(ErrorCode::parse_error, where + ": directed entries need answer/question rule");
      } else if (rule != "-") {
        throw Error(ErrorCode::parse_error, where + ": undirected entries take '-' as rule");
      }
      try {
        e.sense_if_arg1 = vocab.parse_id(cols[4]);
        e.sense_if_arg2 = vocab.parse_id(cols[5]);
      } catch (const Error& err) {
        throw Error(ErrorCode::parse_error, where + ": " + err.message());
      }
      e.reconstructed = cols.size() > 6 && text::lower(text::trim(cols[6])) == "reconstructed";
      if (e.directed == (e.sense_if_arg1 == e.sense_if_arg2))
        throw Error(ErrorCode::parse_error,
                    where + (e.directed ? ": directed family needs two distinct realizations"
                                        : ": undirected family must use one sense"));
      for (auto s : {e.sense_if_arg1, e.sense_if_arg2})
        if (vocab.level2_of(s) != e.family)
          throw Error(ErrorCode::parse_error, where + ": " + vocab.at(s).id + " is not in family " + e.family);
      auto key = normalize_prefix(e.prefix);
      if (inv.index_.count(key)) throw Error(ErrorCode::parse_error, where + ": duplicate prefix " + e.prefix);
      inv.index_.emplace(key, inv.entries_.size());
      if (!e.directed) inv.symmetric_.insert(e.family);
      inv.entries_.push_back(std::move(e));
    }
    if (inv.entries_.empty()) throw Error(ErrorCode::parse_error, "inventory: no prefixes");
    return inv;
  }

  static PrefixInventory from_file(const std::string& path, const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
    return from_tsv(text::read_file(path), vocab);
  }

  static const PrefixInventory& seed() {
    static const PrefixInventory inv = from_tsv(embedded::qa_prefixes_tsv);
    return inv;
  }

  const SenseVocabulary& vocab() const { return *vocab_; }
  const std::string& version() const { return version_; }
  const std::vector<PrefixEntry>& entries() const { return entries_; }
  const std::set<std::string>& symmetric_set() const { return symmetric_; }

  const PrefixEntry* find(std::string_view prefix) const {
    auto it = index_.find(normalize_prefix(prefix));
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  const PrefixEntry& at(std::string_view prefix) const {
    if (const auto* e = find(prefix)) return *e;
    throw Error(ErrorCode::unknown_prefix, "'" + std::string(prefix) + "' (inventory " + version_ + ")");
  }

  // Every sense some (prefix, question_source) pair resolves to.
  std::set<LabelId> image() const {
    std::set<LabelId> out;
    for (const auto& e : entries_) out.insert({e.sense_if_arg1, e.sense_if_arg2});
    return out;
  }

 private:
  const SenseVocabulary* vocab_ = nullptr;
  std::string version_;
  std::vector<PrefixEntry> entries_;
  std::map<std::string, std::size_t> index_;
  std::set<std::string> symmetric_;
};

struct QaSubmission {
  std::string item_id;
  Side question_source = Side::s1;
  std::string prefix;
  std::string question_text;  // stored verbatim, never parsed
  std::string answer_text;
};

inline LabelId resolve(const PrefixEntry& e, Side question_source) {
  if (!e.directed) return e.sense_if_arg1;
  Side role = *e.rule == RoleSide::answer ? other(question_source) : question_source;
  return role == Side::s1 ? e.sense_if_arg1 : e.sense_if_arg2;
}

inline LabelId resolve_qa(const QaSubmission& sub, const PrefixInventory& inv = PrefixInventory::seed()) {
  return resolve(inv.at(sub.prefix), sub.question_source);
}

inline bool equivalent_formulations(const QaSubmission& a, const QaSubmission& b,
                                    const PrefixInventory& inv = PrefixInventory::seed()) {
  if (a.item_id != b.item_id) throw Error(ErrorCode::item_mismatch, a.item_id + " vs " + b.item_id);
  return resolve_qa(a, inv) == resolve_qa(b, inv);
}

inline json raw_payload(const QaSubmission& sub, const PrefixInventory& inv) {
  return json{{"question_source", std::string(to_string(sub.question_source))},
              {"prefix", sub.prefix},
              {"question", sub.question_text},
              {"answer", sub.answer_text},
              {"inventory_version", inv.version()}};
}

inline LabelId map_qa_vote(const json& payload, const PrefixInventory& inv = PrefixInventory::seed()) {
  if (!payload.is_object() || !payload.contains("question_source") || !payload.contains("prefix"))
    throw Error(ErrorCode::invalid_argument, "qa payload needs question_source and prefix");
  auto prefix = payload["prefix"].get<std::string>();
  const auto* e = inv.find(prefix);
  if (!e)
    throw Error(ErrorCode::unknown_prefix, "'" + prefix + "' (payload inventory " +
                                               payload.value("inventory_version", std::string("unknown")) +
                                               ", current inventory " + inv.version() + ")");
  return resolve(*e, parse_side(payload["question_source"].get<std::string>()));
}

// Turns submissions into votes, allowing one sense per (item, worker).
class QaRecorder {
 public:
  explicit QaRecorder(const PrefixInventory& inv = PrefixInventory::seed()) : inv_(&inv) {}

  Vote submit(const std::string& worker_id, const QaSubmission& sub) {
    auto sense = resolve_qa(sub, *inv_);
    {
      std::lock_guard lock(mu_);
      if (!seen_.emplace(sub.item_id, worker_id).second)
        throw Error(ErrorCode::duplicate_vote, "worker " + worker_id + " already answered " + sub.item_id);
    }
    return Vote{sub.item_id, Method::qa, worker_id, sense, raw_payload(sub, *inv_)};
  }

 private:
  const PrefixInventory* inv_;
  std::mutex mu_;
  std::set<std::pair<std::string, std::string>> seen_;
};

}  // namespace discorel::qa
