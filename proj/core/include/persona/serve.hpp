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

#pragma once

#include "persona/data.hpp"
#include "persona/decoder.hpp"
#include "persona/model.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace persona {

/// Error carrying an HTTP-style status (400, 404, ...).
class ServeError : public std::runtime_error {
 public:
  ServeError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct ChatTurn {
  std::string speaker;  // "user" or "model"
  std::string text;
};

struct ChatReply {
  std::string reply;
  std::vector<double> coverage;
  std::vector<double> coverage_weights;  // attention used to update coverage
  std::vector<double> semantic_weights;
  int interaction_steps = 0;
};

/// Read-only copy of a session.
struct SessionView {
  std::string id;
  std::vector<std::string> persona_a;
  std::vector<std::string> persona_b;
  std::vector<ChatTurn> transcript;
  std::vector<double> coverage;
  std::vector<double> coverage_weights;
  DecodeConfig decode;
};

/// Chat sessions over one immutable model. Different sessions may be used
/// from different threads; calls on one session are serialized.
class SessionManager {
 public:
  /// With `transcript_dir`, every session appends its events to
  /// `<dir>/<id>.jsonl` and can be rebuilt with restore().
  SessionManager(const PersonaModel& model, const Vocabulary& vocab, const BatchCaps& caps,
                 std::optional<std::filesystem::path> transcript_dir = std::nullopt);
  ~SessionManager();

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  std::string create(const std::vector<std::string>& persona_a,
                     const std::vector<std::string>& persona_b, const DecodeConfig& decode = {});
  ChatReply post(const std::string& id, const std::string& text);
  SessionView get(const std::string& id) const;
  void remove(const std::string& id);
  std::size_t size() const;

  /// Feeds the user turns of `view` into a fresh session and returns its id.
  std::string replay(const SessionView& view);
  /// Rebuilds a session from a transcript file written by this class. The
  /// regenerated replies must match the recorded ones.
  std::string restore(const std::filesystem::path& transcript);

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  std::string create_with_id(const std::string& id, const std::vector<std::string>& persona_a,
                             const std::vector<std::string>& persona_b, const DecodeConfig& decode,
                             bool persist);
  ChatReply post_locked(Session& s, const std::string& text);

  const PersonaModel& model_;
  const Vocabulary& vocab_;
  BatchCaps caps_;
  std::optional<std::filesystem::path> transcript_dir_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  unsigned long next_id_ = 1;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Routes one request: POST /sessions, POST /sessions/{id}/messages,
/// GET /sessions/{id}, DELETE /sessions/{id}. Errors come back as
/// {"code": ..., "message": ...} with a 4xx/5xx status.
HttpResponse handle_request(SessionManager& sessions, const std::string& method,
                            const std::string& path, const std::string& body);

/// HTTP front end. Optionally serves a static directory under /ui.
class HttpService {
 public:
  explicit HttpService(SessionManager& sessions,
                       std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~HttpService();

  /// Binds and returns the port (pass 0 for any free port).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace persona
