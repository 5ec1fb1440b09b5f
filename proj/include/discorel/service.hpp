#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "discorel/corpus.hpp"
#include "discorel/dc_engine.hpp"
#include "discorel/error.hpp"
#include "discorel/qa_engine.hpp"
#include "discorel/text.hpp"

namespace discorel::service {

// Registered annotators, one worker id per line ('#' comments allowed).
class WorkerRegistry {
 public:
  WorkerRegistry() = default;
  explicit WorkerRegistry(std::set<std::string> workers) : workers_(std::move(workers)) {}

  static WorkerRegistry from_text(std::string_view contents) {
    std::set<std::string> w;
    for (const auto& line : text::split_lines(contents)) {
      auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      w.emplace(text::words(t).front());
    }
    return WorkerRegistry(std::move(w));
  }

  static WorkerRegistry from_file(const std::string& path) { return from_text(text::read_file(path)); }

  bool contains(const std::string& id) const { return workers_.count(id) > 0; }
  std::size_t size() const { return workers_.size(); }

 private:
  std::set<std::string> workers_;
};

// Append-only vote log. At most one vote per (item, worker, method) is ever
// written; the check and the append happen under one lock.
class VoteLog {
 public:
  explicit VoteLog(const SenseVocabulary& vocab = SenseVocabulary::pdtb3(), std::string path = {})
      : vocab_(&vocab), path_(std::move(path)) {
    if (path_.empty()) return;
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_);
      std::string line;
      int line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
          auto v = Corpus::parse_vote(json::parse(line), *vocab_);
          keys_.emplace(v.item_id, v.method, v.worker_id);
          votes_.push_back(std::move(v));
        } catch (const std::exception& e) {
          throw Error(ErrorCode::parse_error, path_ + " line " + std::to_string(line_no) + ": " + e.what());
        }
      }
    }
    out_.open(path_, std::ios::app);
    if (!out_) throw Error(ErrorCode::io_error, "cannot open vote log " + path_);
  }

  void append(const Vote& v) {
    std::lock_guard lock(mu_);
    if (!keys_.emplace(v.item_id, v.method, v.worker_id).second)
      throw Error(ErrorCode::duplicate_vote, "worker " + v.worker_id + " already voted on " + v.item_id);
    if (out_.is_open()) {
      Corpus c(*vocab_);
      out_ << c.vote_to_json(v).dump() << '\n';
      out_.flush();
    }
    votes_.push_back(v);
  }

  bool contains(const std::string& item, Method m, const std::string& worker) const {
    std::lock_guard lock(mu_);
    return keys_.count({item, m, worker}) > 0;
  }

  std::vector<Vote> snapshot() const {
    std::lock_guard lock(mu_);
    return votes_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return votes_.size();
  }

 private:
  const SenseVocabulary* vocab_;
  std::string path_;
  std::ofstream out_;
  mutable std::mutex mu_;
  std::vector<Vote> votes_;
  std::set<std::tuple<std::string, Method, std::string>> keys_;
};

struct SessionToken {
  std::string id;
  std::string worker_id;
  Method method = Method::dc;
  std::chrono::system_clock::time_point issued_at;
};

enum class AssignmentStatus { pending, in_progress, done };

inline std::string_view to_string(AssignmentStatus s) {
  switch (s) {
    case AssignmentStatus::pending: return "pending";
    case AssignmentStatus::in_progress: return "in_progress";
    case AssignmentStatus::done: return "done";
  }
  return "?";
}

struct Assignment {
  std::string item_id;
  std::string batch_id;
  std::size_t position = 0;  // 1-based within the batch
  AssignmentStatus status = AssignmentStatus::pending;
};

struct ServiceConfig {
  std::string data_dir;  // empty: votes kept in memory only
  std::string admin_token;
  std::uint64_t dispatch_seed = 7;
  std::size_t batch_size = 20;
  std::chrono::seconds session_ttl{std::chrono::hours(4)};
};

inline std::string random_token() {
  std::random_device rd;
  std::uint64_t hi = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::uint64_t lo = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return text::hex64(hi) + text::hex64(lo);
}

class AnnotationService {
 public:
  AnnotationService(const Corpus& items, WorkerRegistry workers, const dc::ConnectiveBank& bank,
                    const qa::PrefixInventory& inventory, ServiceConfig cfg)
      : items_(&items), workers_(std::move(workers)), bank_(&bank), inventory_(&inventory), cfg_(std::move(cfg)),
        log_(items.vocab(), cfg_.data_dir.empty() ? std::string{} : prepare_dir(cfg_.data_dir) + "/votes.jsonl") {}

  const ServiceConfig& config() const { return cfg_; }
  const Corpus& items() const { return *items_; }
  const VoteLog& log() const { return log_; }

  SessionToken create_session(const std::string& worker_id, Method method) {
    if (!workers_.contains(worker_id)) throw Error(ErrorCode::unknown_worker, "'" + worker_id + "' is not registered");
    auto s = std::make_shared<Session>();
    s->token = SessionToken{random_token(), worker_id, method, std::chrono::system_clock::now()};
    s->last_active = std::chrono::steady_clock::now();
    {
      std::lock_guard lock(dispatch_mu_);
      auto batch_no = ++batches_[{worker_id, method}];
      s->assignments = dispatch(worker_id, method, worker_id + ":" + std::string(to_string(method)) + ":" +
                                                       std::to_string(batch_no));
    }
    std::unique_lock lock(sessions_mu_);
    sessions_[s->token.id] = s;
    return s->token;
  }

  // Next pending item of the batch, without reference labels. A repeated call
  // while an item is in progress returns that item again.
  json next_item(const std::string& token) {
    auto s = session(token);
    std::lock_guard lock(s->mu);
    touch(*s);
    Assignment* a = current(*s);
    if (!a) {
      auto it = std::find_if(s->assignments.begin(), s->assignments.end(),
                             [](const Assignment& x) { return x.status == AssignmentStatus::pending; });
      if (it == s->assignments.end()) throw Error(ErrorCode::batch_complete, "batch finished");
      it->status = AssignmentStatus::in_progress;
      a = &*it;
      if (s->token.method == Method::dc) s->dc.emplace(a->item_id, *bank_);
    }
    const auto* item = items_->find_item(a->item_id);
    json it_json{{"item_id", item->item_id}, {"genre", item->genre}, {"s1", item->s1}, {"s2", item->s2}};
    if (item->context) it_json["context"] = *item->context;
    return json{{"item", it_json},
                {"batch_id", a->batch_id},
                {"position", a->position},
                {"batch_size", s->assignments.size()},
                {"method", std::string(to_string(s->token.method))}};
  }

  json dc_step1(const std::string& token, const json& payload) {
    auto s = session(token);
    std::lock_guard lock(s->mu);
    touch(*s);
    require_method(*s, Method::dc);
    auto* a = active(*s, payload, "dc/step1");
    auto connective = string_field(payload, "connective");
    const auto& list = s->dc->step1(connective);
    s->idempotency.insert(key(*s, a->item_id, "dc/step1"));
    json options = json::array();
    for (const auto& o : list) options.push_back(o.connective);
    return json{{"item_id", a->item_id}, {"options", options}};
  }

  json dc_step2(const std::string& token, const json& payload) {
    auto s = session(token);
    std::lock_guard lock(s->mu);
    touch(*s);
    require_method(*s, Method::dc);
    auto* a = active(*s, payload, "dc/step2");
    auto choice = string_field(payload, "choice");
    dc::DcSession attempt = *s->dc;  // commit only after the vote is persisted
    attempt.step2(choice);
    auto vote = attempt.to_vote(s->token.worker_id);
    vote.raw->operator[]("taxonomy_version") = items_->vocab().version();
    log_.append(vote);
    *s->dc = std::move(attempt);
    return finish(*s, *a, "dc/step2");
  }

  json submit_qa(const std::string& token, const json& payload) {
    auto s = session(token);
    std::lock_guard lock(s->mu);
    touch(*s);
    require_method(*s, Method::qa);
    auto* a = active(*s, payload, "qa");
    const auto* item = items_->find_item(a->item_id);
    qa::QaSubmission sub;
    sub.item_id = a->item_id;
    sub.question_source = qa::parse_side(string_field(payload, "question_source"));
    sub.prefix = string_field(payload, "prefix");
    sub.question_text = payload.value("question", std::string{});
    sub.answer_text = payload.value("answer", sub.question_source == qa::Side::s1 ? item->s2 : item->s1);
    auto sense = qa::resolve_qa(sub, *inventory_);
    auto raw = qa::raw_payload(sub, *inventory_);
    raw["taxonomy_version"] = items_->vocab().version();
    log_.append(Vote{a->item_id, Method::qa, s->token.worker_id, sense, raw});
    return finish(*s, *a, "qa");
  }

  // Votes in the corpus votes format, filtered by method and genre.
  std::string export_votes(const std::string& admin_credential, std::optional<Method> method = std::nullopt,
                           std::optional<std::string> genre = std::nullopt) const {
    if (cfg_.admin_token.empty() || admin_credential != cfg_.admin_token)
      throw Error(ErrorCode::unauthorized, "admin credential required");
    Corpus fmt(items_->vocab());
    std::string out;
    for (const auto& v : log_.snapshot()) {
      if (method && v.method != *method) continue;
      if (genre) {
        const auto* item = items_->find_item(v.item_id);
        if (!item || item->genre != *genre) continue;
      }
      out += fmt.vote_to_json(v).dump() + "\n";
    }
    return out;
  }

  std::vector<Assignment> assignments(const std::string& token) {
    auto s = session(token);
    std::lock_guard lock(s->mu);
    return s->assignments;
  }

 private:
  struct Session {
    SessionToken token;
    std::vector<Assignment> assignments;
    std::optional<dc::DcSession> dc;
    std::set<std::string> idempotency;
    std::chrono::steady_clock::time_point last_active;
    std::mutex mu;
  };

  static std::string prepare_dir(const std::string& dir) {
    std::filesystem::create_directories(dir);
    return dir;
  }

  static std::string string_field(const json& payload, const char* name) {
    if (!payload.is_object() || !payload.contains(name) || !payload[name].is_string())
      throw Error(ErrorCode::invalid_argument, std::string("missing string field '") + name + "'");
    return payload[name].get<std::string>();
  }

  static std::string key(const Session& s, const std::string& item, const char* step) {
    return s.token.id + "|" + item + "|" + step;
  }

  std::shared_ptr<Session> session(const std::string& token) {
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(token);
    if (it == sessions_.end()) throw Error(ErrorCode::not_found, "unknown session");
    return it->second;
  }

  void touch(Session& s) const {
    auto now = std::chrono::steady_clock::now();
    if (now - s.last_active > cfg_.session_ttl) throw Error(ErrorCode::session_expired, "session expired");
    s.last_active = now;
  }

  static void require_method(const Session& s, Method m) {
    if (s.token.method != m)
      throw Error(ErrorCode::session_state, "session is a " + std::string(to_string(s.token.method)) + " session");
  }

  static Assignment* current(Session& s) {
    for (auto& a : s.assignments)
      if (a.status == AssignmentStatus::in_progress) return &a;
    return nullptr;
  }

  // The in-progress item a step applies to. Replays of an already accepted
  // step raise DuplicateVote and leave the session unchanged.
  Assignment* active(Session& s, const json& payload, const char* step) {
    std::optional<std::string> claimed;
    if (payload.is_object() && payload.contains("item_id") && payload["item_id"].is_string())
      claimed = payload["item_id"].get<std::string>();
    Assignment* a = current(s);
    std::string item = claimed ? *claimed : (a ? a->item_id : last_done(s));
    if (!item.empty() && s.idempotency.count(key(s, item, step)))
      throw Error(ErrorCode::duplicate_vote, std::string(step) + " already accepted for " + item);
    if (!a) throw Error(ErrorCode::session_state, "no item in progress; call next first");
    if (claimed && *claimed != a->item_id)
      throw Error(ErrorCode::item_mismatch, "item " + *claimed + " is not the item in progress");
    return a;
  }

  static std::string last_done(const Session& s) {
    for (auto it = s.assignments.rbegin(); it != s.assignments.rend(); ++it)
      if (it->status == AssignmentStatus::done) return it->item_id;
    return {};
  }

  json finish(Session& s, Assignment& a, const char* step) {
    s.idempotency.insert(key(s, a.item_id, step));
    a.status = AssignmentStatus::done;
    s.dc.reset();
    auto done = std::count_if(s.assignments.begin(), s.assignments.end(),
                              [](const Assignment& x) { return x.status == AssignmentStatus::done; });
    return json{{"item_id", a.item_id},
                {"status", "recorded"},
                {"completed", done},
                {"batch_size", s.assignments.size()},
                {"batch_complete", static_cast<std::size_t>(done) == s.assignments.size()}};
  }

  // Seeded per-worker shuffle of the items this worker has never been given
  // for this method. Callers hold dispatch_mu_.
  std::vector<Assignment> dispatch(const std::string& worker, Method m, const std::string& batch_id) {
    auto& given = assigned_[{worker, m}];
    std::vector<std::string> pool;
    for (const auto& item : items_->items())
      if (!given.count(item.item_id) && !log_.contains(item.item_id, m, worker)) pool.push_back(item.item_id);
    std::uint64_t seed = text::fnv1a64(worker + "|" + std::string(to_string(m)), cfg_.dispatch_seed);
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<Assignment> out;
    for (std::size_t i = 0; i < pool.size() && i < cfg_.batch_size; ++i) {
      out.push_back(Assignment{pool[i], batch_id, i + 1, AssignmentStatus::pending});
      given.insert(pool[i]);
    }
    return out;
  }

  const Corpus* items_;
  WorkerRegistry workers_;
  const dc::ConnectiveBank* bank_;
  const qa::PrefixInventory* inventory_;
  ServiceConfig cfg_;
  VoteLog log_;
  std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex dispatch_mu_;
  std::map<std::pair<std::string, Method>, std::size_t> batches_;
  std::map<std::pair<std::string, Method>, std::set<std::string>> assigned_;
};

}  // namespace discorel::service
