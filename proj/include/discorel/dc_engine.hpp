#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "discorel/corpus.hpp"
#include "discorel/embedded_data.hpp"
#include "discorel/error.hpp"
#include "discorel/taxonomy.hpp"
#include "discorel/text.hpp"

namespace discorel::dc {

// Lowercase, trim, collapse internal whitespace, strip trailing punctuation.
// No spelling correction.
inline std::string normalize_connective(std::string_view raw) {
  std::string out;
  for (auto& w : text::words(text::lower(raw))) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  while (!out.empty() && std::string_view(".,;:!?").find(out.back()) != std::string_view::npos) {
    out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
  }
  if (out.empty()) throw Error(ErrorCode::empty_input, "empty connective");
  return out;
}

struct ConnectiveOption {
  std::string connective;
  LabelId sense;
  friend bool operator==(const ConnectiveOption&, const ConnectiveOption&) = default;
};

using DisambiguationList = std::vector<ConnectiveOption>;

class ConnectiveBank {
 public:
  static constexpr std::string_view default_key = "@default";
  static constexpr std::size_t default_list_size = 12;
  static constexpr std::size_t min_default_level2_classes = 8;

  static ConnectiveBank from_tsv(std::string_view contents, const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
    ConnectiveBank bank;
    bank.vocab_ = &vocab;
    bank.version_ = text::content_version(contents);
    int line_no = 0;
    for (const auto& raw : text::split_lines(contents)) {
      ++line_no;
      auto line = text::trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto cols = text::split(line, '\t');
      auto where = "bank line " + std::to_string(line_no);
      if (cols.size() < 3) throw Error(ErrorCode::parse_error, where + ": expected connective, option, sense");
      std::string key = std::string(text::trim(cols[0]));
      key = key == default_key ? key : normalize_connective(key);
      ConnectiveOption opt{std::string(text::trim(cols[1])), LabelId{}};
      try {
        opt.sense = vocab.parse_id(cols[2]);
      } catch (const Error& e) {
        throw Error(ErrorCode::parse_error, where + ": " + e.message());
      }
      auto& list = key == default_key ? bank.default_list_ : bank.entries_[key];
      for (const auto& existing : list) {
        if (existing.sense == opt.sense)
          throw Error(ErrorCode::parse_error, where + ": two options of '" + key + "' map to " + vocab.at(opt.sense).id);
        if (normalize_connective(existing.connective) == normalize_connective(opt.connective))
          throw Error(ErrorCode::parse_error, where + ": duplicate option '" + opt.connective + "'");
      }
      list.push_back(std::move(opt));
    }
    if (bank.default_list_.size() != default_list_size)
      throw Error(ErrorCode::parse_error, "bank: default list must have exactly 12 options, has " +
                                              std::to_string(bank.default_list_.size()));
    std::set<std::string> classes;
    for (const auto& o : bank.default_list_) classes.insert(vocab.level2_of(o.sense));
    if (classes.size() < min_default_level2_classes)
      throw Error(ErrorCode::parse_error, "bank: default list covers only " + std::to_string(classes.size()) +
                                              " level-2 classes");
    return bank;
  }

  static ConnectiveBank from_file(const std::string& path, const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
    return from_tsv(text::read_file(path), vocab);
  }

  // Seed bank shipped with the library.
  static const ConnectiveBank& seed() {
    static const ConnectiveBank b = from_tsv(embedded::connective_bank_tsv);
    return b;
  }

  const SenseVocabulary& vocab() const { return *vocab_; }
  const std::string& version() const { return version_; }
  const DisambiguationList& default_list() const { return default_list_; }
  const std::map<std::string, DisambiguationList>& entries() const { return entries_; }

  const DisambiguationList* entry(std::string_view normalized) const {
    auto it = entries_.find(std::string(normalized));
    return it == entries_.end() ? nullptr : &it->second;
  }

  // The list shown in step 2 for a step-1 connective.
  const DisambiguationList& lookup(std::string_view raw_connective) const {
    if (const auto* e = entry(normalize_connective(raw_connective))) return *e;
    return default_list_;
  }

  std::set<LabelId> reachable_senses() const {
    std::set<LabelId> out;
    for (const auto& o : default_list_) out.insert(o.sense);
    for (const auto& [k, list] : entries_)
      for (const auto& o : list) out.insert(o.sense);
    return out;
  }

  std::vector<LabelId> unreachable_senses() const {
    auto reach = reachable_senses();
    std::vector<LabelId> out;
    for (const auto& s : vocab_->labels())
      if (!reach.count(s.index)) out.push_back(s.index);
    return out;
  }

 private:
  const SenseVocabulary* vocab_ = nullptr;
  std::string version_;
  DisambiguationList default_list_;
  std::map<std::string, DisambiguationList> entries_;
};

inline const ConnectiveOption* find_choice(const DisambiguationList& list, std::string_view choice) {
  auto key = normalize_connective(choice);
  for (const auto& o : list)
    if (normalize_connective(o.connective) == key) return &o;
  return nullptr;
}

enum class DcState { awaiting_step1, awaiting_step2, complete };

inline std::string_view to_string(DcState s) {
  switch (s) {
    case DcState::awaiting_step1: return "awaiting_step1";
    case DcState::awaiting_step2: return "awaiting_step2";
    case DcState::complete: return "complete";
  }
  return "?";
}

// Forward-only two-step state machine for one item. Not thread-safe; callers
// serialize access per session.
class DcSession {
 public:
  DcSession(std::string item_id, const ConnectiveBank& bank) : item_id_(std::move(item_id)), bank_(&bank) {}

  const DisambiguationList& step1(std::string_view raw_connective) {
    if (state_ != DcState::awaiting_step1)
      throw Error(ErrorCode::session_state, "step1 called in state " + std::string(to_string(state_)));
    normalize_connective(raw_connective);  // rejects empty input before any transition
    presented_ = bank_->lookup(raw_connective);
    step1_text_ = std::string(raw_connective);
    state_ = DcState::awaiting_step2;
    return *presented_;
  }

  const Sense& step2(std::string_view choice) {
    if (state_ != DcState::awaiting_step2)
      throw Error(ErrorCode::session_state, "step2 called in state " + std::string(to_string(state_)));
    const auto* opt = find_choice(*presented_, choice);
    if (!opt) throw Error(ErrorCode::choice_not_in_list, "'" + std::string(choice) + "' was not offered");
    choice_ = opt->connective;
    chosen_ = opt->sense;
    state_ = DcState::complete;
    return bank_->vocab().at(*chosen_);
  }

  DcState state() const { return state_; }
  const std::string& item_id() const { return item_id_; }
  const std::optional<std::string>& step1_text() const { return step1_text_; }
  const std::optional<DisambiguationList>& presented_list() const { return presented_; }
  std::optional<LabelId> chosen() const { return chosen_; }

  json raw_payload() const {
    if (state_ != DcState::complete) throw Error(ErrorCode::session_state, "session not complete");
    return json{{"step1", *step1_text_}, {"choice", *choice_}, {"bank_version", bank_->version()}};
  }

  Vote to_vote(std::string worker_id) const {
    return Vote{item_id_, Method::dc, std::move(worker_id), *chosen_, raw_payload()};
  }

 private:
  std::string item_id_;
  const ConnectiveBank* bank_;
  DcState state_ = DcState::awaiting_step1;
  std::optional<std::string> step1_text_;
  std::optional<DisambiguationList> presented_;
  std::optional<std::string> choice_;
  std::optional<LabelId> chosen_;
};

// Re-maps an archived {step1, choice} payload through the bank.
inline LabelId map_dc_vote(const json& payload, const ConnectiveBank& bank = ConnectiveBank::seed()) {
  if (!payload.is_object() || !payload.contains("step1") || !payload.contains("choice"))
    throw Error(ErrorCode::invalid_argument, "dc payload needs step1 and choice");
  const auto& list = bank.lookup(payload["step1"].get<std::string>());
  const auto choice = payload["choice"].get<std::string>();
  const auto* opt = find_choice(list, choice);
  if (!opt) {
    auto recorded = payload.value("bank_version", std::string("unknown"));
    throw Error(ErrorCode::choice_not_in_list, "'" + choice + "' not offered for '" +
                                                   payload["step1"].get<std::string>() + "' (payload bank " +
                                                   recorded + ", current bank " + bank.version() + ")");
  }
  return opt->sense;
}

}  // namespace discorel::dc
