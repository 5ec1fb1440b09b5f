#pragma once

#include <functional>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "discorel/error.hpp"
#include "discorel/service.hpp"

namespace discorel::http {

inline int status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error:
    case ErrorCode::empty_input:
    case ErrorCode::unknown_label:
      return 400;
    case ErrorCode::unauthorized: return 401;
    case ErrorCode::unknown_worker: return 403;
    case ErrorCode::not_found: return 404;
    case ErrorCode::session_expired: return 410;
    case ErrorCode::batch_complete:
    case ErrorCode::duplicate_vote:
    case ErrorCode::session_state:
    case ErrorCode::item_mismatch:
      return 409;
    case ErrorCode::choice_not_in_list:
    case ErrorCode::unknown_prefix:
      return 422;
    default: return 500;
  }
}

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) {
  send_json(res, status_for(e.code()), json{{"code", std::string(to_string(e.code()))}, {"message", e.message()}});
}

// Runs a handler and turns thrown errors into {code, message} bodies.
inline void guarded(httplib::Response& res, const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const json::exception& e) {
    send_error(res, Error(ErrorCode::invalid_argument, e.what()));
  } catch (const std::exception& e) {
    send_json(res, 500, json{{"code", "InternalError"}, {"message", e.what()}});
  }
}

inline json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed JSON body: ") + e.what());
  }
}

inline std::string bearer(const httplib::Request& req) {
  auto h = req.get_header_value("Authorization");
  constexpr std::string_view scheme = "Bearer ";
  if (h.rfind(scheme, 0) == 0) return h.substr(scheme.size());
  return req.get_header_value("X-Admin-Token");
}

inline void mount(httplib::Server& server, service::AnnotationService& svc) {
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json{{"status", "ok"}});
  });

  server.Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = body_json(req);
      if (!body.contains("worker_id") || !body["worker_id"].is_string())
        throw Error(ErrorCode::invalid_argument, "worker_id is required");
      auto method = parse_method(body.value("method", std::string("dc")));
      auto tok = svc.create_session(body["worker_id"].get<std::string>(), method);
      auto issued = std::chrono::duration_cast<std::chrono::seconds>(tok.issued_at.time_since_epoch()).count();
      send_json(res, 201, json{{"token", tok.id},
                               {"worker_id", tok.worker_id},
                               {"method", std::string(to_string(tok.method))},
                               {"issued_at", issued}});
    });
  });

  server.Get(R"(/sessions/([0-9a-f]+)/next)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.next_item(req.matches[1])); });
  });

  server.Post(R"(/sessions/([0-9a-f]+)/dc/step1)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.dc_step1(req.matches[1], body_json(req))); });
  });

  server.Post(R"(/sessions/([0-9a-f]+)/dc/step2)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, svc.dc_step2(req.matches[1], body_json(req))); });
  });

  server.Post(R"(/sessions/([0-9a-f]+)/qa)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, svc.submit_qa(req.matches[1], body_json(req))); });
  });

  server.Get("/admin/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<Method> method;
      std::optional<std::string> genre;
      if (req.has_param("method")) method = parse_method(req.get_param_value("method"));
      if (req.has_param("genre")) genre = req.get_param_value("genre");
      res.status = 200;
      res.set_content(svc.export_votes(bearer(req), method, genre), "application/x-ndjson");
    });
  });
}

}  // namespace discorel::http
