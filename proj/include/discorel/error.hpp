#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace discorel {

enum class ErrorCode {
  unknown_label,
  parse_error,
  dangling_vote,
  duplicate_worker_vote,
  all_minority,
  empty_set,
  empty_input,
  session_state,
  choice_not_in_list,
  unknown_prefix,
  degenerate_chance,
  not_normalized,
  no_reference,
  missing_method,
  degenerate_matrix,
  item_mismatch,
  divergence_detected,
  unknown_worker,
  batch_complete,
  session_expired,
  duplicate_vote,
  unauthorized,
  not_found,
  invalid_argument,
  io_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_label: return "UnknownLabel";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::dangling_vote: return "DanglingVote";
    case ErrorCode::duplicate_worker_vote: return "DuplicateWorkerVote";
    case ErrorCode::all_minority: return "AllMinority";
    case ErrorCode::empty_set: return "EmptySet";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::session_state: return "SessionStateError";
    case ErrorCode::choice_not_in_list: return "ChoiceNotInList";
    case ErrorCode::unknown_prefix: return "UnknownPrefix";
    case ErrorCode::degenerate_chance: return "DegenerateChance";
    case ErrorCode::not_normalized: return "NotNormalized";
    case ErrorCode::no_reference: return "NoReference";
    case ErrorCode::missing_method: return "MissingMethod";
    case ErrorCode::degenerate_matrix: return "DegenerateMatrix";
    case ErrorCode::item_mismatch: return "ItemMismatch";
    case ErrorCode::divergence_detected: return "DivergenceDetected";
    case ErrorCode::unknown_worker: return "UnknownWorker";
    case ErrorCode::batch_complete: return "BatchComplete";
    case ErrorCode::session_expired: return "SessionExpired";
    case ErrorCode::duplicate_vote: return "DuplicateVote";
    case ErrorCode::unauthorized: return "Unauthorized";
    case ErrorCode::not_found: return "NotFound";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

// All library failures surface as this exception; `code()` is the stable
// machine-readable part, `what()` carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace discorel
