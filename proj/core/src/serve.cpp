// Copyright 2026 The Persona Dialogue Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "persona/serve.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace persona {

namespace fs = std::filesystem;
using nlohmann::json;

struct SessionManager::Session {
  std::mutex mutex;
  std::string id;
  std::vector<std::string> persona_a_text, persona_b_text;
  std::vector<std::vector<int>> persona_a, persona_b;
  std::vector<ChatTurn> transcript;
  std::vector<std::vector<int>> turn_ids;  // token ids of every transcript turn
  std::vector<double> coverage;
  std::vector<double> coverage_weights;
  DecodeConfig decode;
  std::ofstream log;
};

namespace {

std::vector<int> sentence_ids(const Vocabulary& vocab, const std::string& text, int k_max) {
  std::vector<int> ids = vocab.encode(tokenize(text));
  if (static_cast<int>(ids.size()) > k_max) ids.resize(static_cast<std::size_t>(k_max));
  return ids;
}

std::vector<std::vector<int>> persona_ids(const Vocabulary& vocab,
                                          const std::vector<std::string>& sentences,
                                          const BatchCaps& caps, const char* which) {
  if (static_cast<int>(sentences.size()) > caps.l_p_max) {
    throw ServeError(400, "invalid_persona",
                     std::string(which) + " has more than " + std::to_string(caps.l_p_max) +
                         " sentences");
  }
  std::vector<std::vector<int>> out;
  for (const auto& s : sentences) {
    auto ids = sentence_ids(vocab, s, caps.k_max);
    if (ids.empty()) {
      throw ServeError(400, "invalid_persona", std::string(which) + " has an empty sentence");
    }
    out.push_back(std::move(ids));
  }
  return out;
}

std::vector<double> to_list(const Vector& v) { return {v.data(), v.data() + v.size()}; }

json view_json(const SessionView& v) {
  json transcript = json::array();
  for (const auto& t : v.transcript) transcript.push_back({{"speaker", t.speaker}, {"text", t.text}});
  return {{"id", v.id},
          {"persona_a", v.persona_a},
          {"persona_b", v.persona_b},
          {"transcript", transcript},
          {"coverage", v.coverage},
          {"coverage_weights", v.coverage_weights},
          {"config", {{"beam_size", v.decode.beam_size}, {"max_len", v.decode.max_len}}}};
}

json reply_json(const ChatReply& r) {
  return {{"reply", r.reply},
          {"coverage", r.coverage},
          {"coverage_weights", r.coverage_weights},
          {"semantic_weights", r.semantic_weights},
          {"interaction_steps", r.interaction_steps}};
}

}  // namespace

SessionManager::SessionManager(const PersonaModel& model, const Vocabulary& vocab,
                               const BatchCaps& caps, std::optional<fs::path> transcript_dir)
    : model_(model), vocab_(vocab), caps_(caps), transcript_dir_(std::move(transcript_dir)) {
  if (model.config().vocab_size != vocab.size()) {
    throw std::invalid_argument("vocabulary size does not match the model");
  }
  if (transcript_dir_) fs::create_directories(*transcript_dir_);
}

SessionManager::~SessionManager() = default;

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServeError(404, "not_found", "unknown session: " + id);
  return it->second;
}

std::string SessionManager::create(const std::vector<std::string>& persona_a,
                                   const std::vector<std::string>& persona_b,
                                   const DecodeConfig& decode) {
  std::string id;
  {
    std::unique_lock lock(map_mutex_);
    do {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "s%06lu", next_id_++);
      id = buf;
    } while (sessions_.count(id) != 0);
  }
  return create_with_id(id, persona_a, persona_b, decode, true);
}

std::string SessionManager::create_with_id(const std::string& id,
                                           const std::vector<std::string>& persona_a,
                                           const std::vector<std::string>& persona_b,
                                           const DecodeConfig& decode, bool persist) {
  if (persona_a.empty()) throw ServeError(400, "invalid_persona", "persona_a is empty");
  if (decode.beam_size < 1 || decode.max_len < 1) {
    throw ServeError(400, "invalid_config", "beam_size and max_len must be >= 1");
  }
  auto s = std::make_shared<Session>();
  s->id = id;
  s->persona_a_text = persona_a;
  s->persona_b_text = persona_b;
  s->persona_a = persona_ids(vocab_, persona_a, caps_, "persona_a");
  s->persona_b = persona_ids(vocab_, persona_b, caps_, "persona_b");
  s->coverage.assign(s->persona_a.size(), 0.0);
  s->decode = decode;
  if (persist && transcript_dir_) {
    s->log.open(*transcript_dir_ / (id + ".jsonl"), std::ios::trunc);
    if (!s->log) throw ServeError(500, "io_error", "cannot open transcript for " + id);
    json event = {{"event", "create"},
                  {"id", id},
                  {"persona_a", persona_a},
                  {"persona_b", persona_b},
                  {"beam_size", decode.beam_size},
                  {"max_len", decode.max_len}};
    s->log << event.dump() << '\n' << std::flush;
  }
  std::unique_lock lock(map_mutex_);
  if (!sessions_.emplace(id, s).second) {
    throw ServeError(409, "conflict", "session already exists: " + id);
  }
  return id;
}

ChatReply SessionManager::post_locked(Session& s, const std::string& text) {
  auto user = sentence_ids(vocab_, text, caps_.k_max);
  if (user.empty()) throw ServeError(400, "empty_message", "message text is empty");

  // The context is the trailing window of the conversation ending in the
  // new user turn; the interaction is recomputed over it from scratch.
  std::vector<std::vector<int>> turns = s.turn_ids;
  turns.push_back(user);
  ExampleIds ex;
  ex.persona_a = s.persona_a;
  ex.persona_b = s.persona_b;
  const std::size_t window = std::min(turns.size(), static_cast<std::size_t>(caps_.l_c_max));
  ex.context.assign(turns.end() - static_cast<std::ptrdiff_t>(window), turns.end());
  ex.response = {Vocabulary::kSos, Vocabulary::kEos};

  const PersonaModel::Snapshot snap = model_.snapshot(ex);
  std::vector<int> out =
      s.decode.beam_size <= 1
          ? model_.decoder().greedy_decode(snap.context, snap.style, s.decode.max_len)
          : model_.decoder()
                .beam_decode(snap.context, snap.style, s.decode.beam_size, s.decode.max_len)
                .tokens;
  ChatReply r;
  r.reply = detokenize(vocab_.decode(out));
  r.coverage = to_list(snap.coverage);
  r.coverage_weights = to_list(snap.last_coverage_weights);
  r.semantic_weights = to_list(snap.last_semantic_weights);
  r.interaction_steps = snap.interaction_steps;

  std::vector<int> reply_ids = sentence_ids(vocab_, r.reply, caps_.k_max);
  if (reply_ids.empty()) reply_ids.push_back(vocab_.id(kSilenceToken));
  s.turn_ids.push_back(std::move(user));
  s.turn_ids.push_back(std::move(reply_ids));
  s.transcript.push_back({"user", text});
  s.transcript.push_back({"model", r.reply});
  s.coverage = r.coverage;
  s.coverage_weights = r.coverage_weights;
  if (s.log.is_open()) {
    s.log << json{{"event", "message"}, {"text", text}, {"reply", r.reply}}.dump() << '\n'
          << std::flush;
  }
  return r;
}

ChatReply SessionManager::post(const std::string& id, const std::string& text) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return post_locked(*s, text);
}

SessionView SessionManager::get(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return {s->id,         s->persona_a_text, s->persona_b_text,    s->transcript,
          s->coverage,   s->coverage_weights, s->decode};
}

void SessionManager::remove(const std::string& id) {
  std::unique_lock lock(map_mutex_);
  if (sessions_.erase(id) == 0) throw ServeError(404, "not_found", "unknown session: " + id);
}

std::size_t SessionManager::size() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

std::string SessionManager::replay(const SessionView& view) {
  const std::string id = create(view.persona_a, view.persona_b, view.decode);
  for (const auto& turn : view.transcript) {
    if (turn.speaker == "user") post(id, turn.text);
  }
  return id;
}

std::string SessionManager::restore(const fs::path& transcript) {
  std::ifstream in(transcript);
  if (!in) throw std::runtime_error("cannot open transcript " + transcript.string());
  std::string line;
  std::size_t lineno = 0;
  std::shared_ptr<Session> s;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json event;
    try {
      event = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("transcript line " + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    const std::string kind = event.value("event", "");
    if (kind == "create") {
      if (s) throw ParseError("transcript line " + std::to_string(lineno) + ": second create", lineno);
      DecodeConfig decode;
      decode.beam_size = event.value("beam_size", 1);
      decode.max_len = event.value("max_len", 30);
      const auto id = create_with_id(event.at("id").get<std::string>(),
                                     event.at("persona_a").get<std::vector<std::string>>(),
                                     event.at("persona_b").get<std::vector<std::string>>(), decode,
                                     false);
      s = find(id);
    } else if (kind == "message") {
      if (!s) throw ParseError("transcript line " + std::to_string(lineno) + ": no session", lineno);
      std::lock_guard lock(s->mutex);
      const ChatReply r = post_locked(*s, event.at("text").get<std::string>());
      if (r.reply != event.at("reply").get<std::string>()) {
        throw std::runtime_error("transcript line " + std::to_string(lineno) +
                                 ": regenerated reply differs from the recorded one");
      }
    } else {
      throw ParseError("transcript line " + std::to_string(lineno) + ": unknown event", lineno);
    }
  }
  if (!s) throw ParseError("transcript has no create event", lineno);
  if (transcript_dir_) {
    std::lock_guard lock(s->mutex);
    s->log.open(*transcript_dir_ / (s->id + ".jsonl"), std::ios::app);
  }
  return s->id;
}

// ------------------------------------------------------------------- HTTP

HttpResponse handle_request(SessionManager& sessions, const std::string& method,
                            const std::string& path, const std::string& body) {
  auto error = [](int status, const std::string& code, const std::string& message) {
    return HttpResponse{status, json{{"code", code}, {"message", message}}.dump()};
  };
  std::vector<std::string> parts;
  for (std::size_t at = 0; at <= path.size();) {
    const auto slash = path.find('/', at);
    const auto end = slash == std::string::npos ? path.size() : slash;
    if (end > at) parts.push_back(path.substr(at, end - at));
    at = end + 1;
  }
  try {
    if (parts.empty() || parts[0] != "sessions" || parts.size() > 3 ||
        (parts.size() == 3 && parts[2] != "messages")) {
      return error(404, "not_found", "no route for " + path);
    }
    auto parse_body = [&] {
      try {
        json j = json::parse(body.empty() ? std::string("{}") : body);
        if (!j.is_object()) throw ServeError(400, "bad_request", "body must be a JSON object");
        return j;
      } catch (const json::parse_error& e) {
        throw ServeError(400, "bad_request", std::string("malformed JSON: ") + e.what());
      }
    };
    if (parts.size() == 1) {
      if (method != "POST") return error(405, "method_not_allowed", method + " " + path);
      const json j = parse_body();
      DecodeConfig decode;
      decode.beam_size = j.value("beam_size", 1);
      decode.max_len = j.value("max_len", 30);
      const auto id = sessions.create(j.value("persona_a", std::vector<std::string>{}),
                                      j.value("persona_b", std::vector<std::string>{}), decode);
      return {201, view_json(sessions.get(id)).dump()};
    }
    const std::string& id = parts[1];
    if (parts.size() == 3) {
      if (method != "POST") return error(405, "method_not_allowed", method + " " + path);
      const json j = parse_body();
      if (!j.contains("text") || !j["text"].is_string()) {
        throw ServeError(400, "bad_request", "field 'text' must be a string");
      }
      return {200, reply_json(sessions.post(id, j["text"].get<std::string>())).dump()};
    }
    if (method == "GET") return {200, view_json(sessions.get(id)).dump()};
    if (method == "DELETE") {
      sessions.remove(id);
      return {200, json{{"deleted", id}}.dump()};
    }
    return error(405, "method_not_allowed", method + " " + path);
  } catch (const ServeError& e) {
    return error(e.status(), e.code(), e.what());
  } catch (const json::exception& e) {
    return error(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    return error(500, "internal", e.what());
  }
}

struct HttpService::Impl {
  httplib::Server server;
};

HttpService::HttpService(SessionManager& sessions, std::optional<fs::path> ui_dir)
    : impl_(std::make_unique<Impl>()) {
  auto route = [&sessions](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = handle_request(sessions, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Post(R"(/sessions(/.*)?)", route);
  impl_->server.Get(R"(/sessions(/.*)?)", route);
  impl_->server.Delete(R"(/sessions(/.*)?)", route);
  if (ui_dir && !impl_->server.set_mount_point("/ui", ui_dir->string())) {
    throw std::runtime_error("cannot serve UI directory " + ui_dir->string());
  }
}

HttpService::~HttpService() = default;

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw std::runtime_error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() { impl_->server.stop(); }

}  // namespace persona
