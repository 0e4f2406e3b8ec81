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

#include "support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>
#include <unistd.h>

namespace persona {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Vocabulary toy_vocab() {
  DialogueExample ex;
  ex.persona_a = {{"i", "like", "dogs"}, {"i", "am", "a", "doctor"}};
  ex.persona_b = ex.persona_a;
  ex.context = {{"hello", "how", "are", "you", "?"}, {"fine", "thanks", "and", "you"}};
  ex.response = {"i", "have", "four", "children", "."};
  return build_vocab(std::span(&ex, 1), 1, 1000);
}

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

class ServeTest : public ::testing::Test {
 protected:
  ServeTest()
      : vocab_(toy_vocab()),
        model_(testing::tiny_config(vocab_.size(), 8), 21),
        caps_{8, 3, 4} {}

  fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() /
                         ("persona_serve_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    return dir;
  }

  const std::vector<std::string> persona_ = {"i like dogs", "i am a doctor"};
  Vocabulary vocab_;
  PersonaModel model_;
  BatchCaps caps_;
};

TEST_F(ServeTest, FreshSessionHasZeroCoverage) {
  SessionManager m(model_, vocab_, caps_);
  const auto id = m.create(persona_, {});
  const auto v = m.get(id);
  EXPECT_EQ(v.coverage, std::vector<double>(2, 0.0));
  EXPECT_TRUE(v.transcript.empty());
  // Stored as given; the model substitutes persona A when B is empty.
  EXPECT_TRUE(v.persona_b.empty());
  EXPECT_EQ(m.size(), 1u);
}

TEST_F(ServeTest, Validation) {
  SessionManager m(model_, vocab_, caps_);
  auto status = [](auto&& f) {
    try {
      f();
    } catch (const ServeError& e) {
      return e.status();
    }
    return 0;
  };
  EXPECT_EQ(status([&] { m.create({}, {}); }), 400);
  EXPECT_EQ(status([&] { m.create({"a", "b", "c", "d", "e"}, {}); }), 400);
  EXPECT_EQ(status([&] { m.post("s999999", "hi"); }), 404);
  EXPECT_EQ(status([&] { m.get("nope"); }), 404);
  const auto id = m.create(persona_, {});
  EXPECT_EQ(status([&] { m.post(id, "   "); }), 400);
  m.remove(id);
  EXPECT_EQ(status([&] { m.remove(id); }), 404);
  EXPECT_EQ(m.size(), 0u);
}

TEST_F(ServeTest, CoverageSumsToTheInteractionSteps) {
  SessionManager m(model_, vocab_, caps_);
  const auto id = m.create(persona_, {}, DecodeConfig{1, 6});
  const std::vector<std::string> turns = {"hello", "how are you ?", "i like dogs", "fine thanks",
                                          "and you"};
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const ChatReply r = m.post(id, turns[i]);
    // Each step adds one attention distribution over the persona.
    EXPECT_NEAR(total(r.coverage), r.interaction_steps, 1e-12);
    EXPECT_NEAR(total(r.coverage_weights), 1.0, 1e-12);
    EXPECT_NEAR(total(r.semantic_weights), 1.0, 1e-12);
    EXPECT_LE(r.interaction_steps, caps_.l_c_max);
    EXPECT_EQ(r.interaction_steps, std::min<int>(2 * static_cast<int>(i) + 1, caps_.l_c_max));
  }
  const auto v = m.get(id);
  EXPECT_EQ(v.transcript.size(), 2 * turns.size());
  EXPECT_EQ(v.transcript[0].speaker, "user");
  EXPECT_EQ(v.transcript[1].speaker, "model");
}

TEST_F(ServeTest, RepliesAreDeterministicAndReplayable) {
  SessionManager m(model_, vocab_, caps_);
  const auto a = m.create(persona_, {}, DecodeConfig{2, 6});
  const auto b = m.create(persona_, {}, DecodeConfig{2, 6});
  for (const char* text : {"hello", "do you like dogs ?", "i have four children"}) {
    const auto ra = m.post(a, text);
    const auto rb = m.post(b, text);
    EXPECT_EQ(ra.reply, rb.reply);
    EXPECT_EQ(ra.coverage, rb.coverage);
  }
  const auto replayed = m.replay(m.get(a));
  const auto va = m.get(a), vr = m.get(replayed);
  ASSERT_EQ(va.transcript.size(), vr.transcript.size());
  for (std::size_t i = 0; i < va.transcript.size(); ++i) {
    EXPECT_EQ(va.transcript[i].text, vr.transcript[i].text);
  }
  EXPECT_EQ(va.coverage, vr.coverage);
}

TEST_F(ServeTest, TranscriptRestore) {
  const fs::path dir = scratch("transcripts");
  std::string id;
  SessionView before;
  {
    SessionManager m(model_, vocab_, caps_, dir);
    id = m.create(persona_, {"i am a doctor"}, DecodeConfig{1, 5});
    for (const char* text : {"hi", "what do you do ?", "nice"}) m.post(id, text);
    before = m.get(id);
  }
  ASSERT_TRUE(fs::exists(dir / (id + ".jsonl")));
  SessionManager fresh(model_, vocab_, caps_, dir);
  const auto restored = fresh.restore(dir / (id + ".jsonl"));
  EXPECT_EQ(restored, id);
  const auto after = fresh.get(id);
  EXPECT_EQ(after.persona_b, before.persona_b);
  ASSERT_EQ(after.transcript.size(), before.transcript.size());
  for (std::size_t i = 0; i < after.transcript.size(); ++i) {
    EXPECT_EQ(after.transcript[i].text, before.transcript[i].text);
  }
  EXPECT_EQ(after.coverage, before.coverage);

  // A tampered reply is caught on restore.
  std::ifstream in(dir / (id + ".jsonl"));
  std::ofstream out(dir / "tampered.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    json e = json::parse(line);
    if (e["event"] == "message") e["reply"] = "tampered reply";
    if (e["event"] == "create") e["id"] = "other";
    out << e.dump() << '\n';
  }
  out.close();
  SessionManager third(model_, vocab_, caps_);
  EXPECT_THROW(third.restore(dir / "tampered.jsonl"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_F(ServeTest, RequestRouting) {
  SessionManager m(model_, vocab_, caps_);
  auto created = handle_request(m, "POST", "/sessions",
                                json{{"persona_a", persona_}, {"beam_size", 2}}.dump());
  ASSERT_EQ(created.status, 201) << created.body;
  const json view = json::parse(created.body);
  const std::string id = view["id"];
  EXPECT_EQ(view["coverage"], json::array({0.0, 0.0}));
  EXPECT_EQ(view["config"]["beam_size"], 2);

  auto reply = handle_request(m, "POST", "/sessions/" + id + "/messages", R"({"text":"hello"})");
  ASSERT_EQ(reply.status, 200) << reply.body;
  const json r = json::parse(reply.body);
  EXPECT_TRUE(r["reply"].is_string());
  EXPECT_EQ(r["coverage"].size(), 2u);
  EXPECT_EQ(r["interaction_steps"], 1);

  EXPECT_EQ(handle_request(m, "GET", "/sessions/" + id, "").status, 200);
  EXPECT_EQ(json::parse(handle_request(m, "GET", "/sessions/" + id, "").body)["transcript"].size(), 2u);

  auto err = handle_request(m, "POST", "/sessions", R"({"persona_a":[]})");
  EXPECT_EQ(err.status, 400);
  EXPECT_EQ(json::parse(err.body)["code"], "invalid_persona");
  EXPECT_EQ(handle_request(m, "POST", "/sessions", "{not json").status, 400);
  EXPECT_EQ(handle_request(m, "POST", "/sessions/" + id + "/messages", R"({"text":""})").status, 400);
  EXPECT_EQ(handle_request(m, "POST", "/sessions/" + id + "/messages", R"({"txt":"x"})").status, 400);
  EXPECT_EQ(handle_request(m, "GET", "/sessions/s424242", "").status, 404);
  EXPECT_EQ(handle_request(m, "GET", "/elsewhere", "").status, 404);
  EXPECT_EQ(handle_request(m, "PUT", "/sessions/" + id, "").status, 405);

  auto del = handle_request(m, "DELETE", "/sessions/" + id, "");
  EXPECT_EQ(del.status, 200);
  EXPECT_EQ(json::parse(del.body)["deleted"], id);
  EXPECT_EQ(handle_request(m, "GET", "/sessions/" + id, "").status, 404);
}

TEST_F(ServeTest, HttpEndToEnd) {
  SessionManager m(model_, vocab_, caps_);
  HttpService service(m);
  const int port = service.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread server([&] { service.listen(); });

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/sessions", json{{"persona_a", persona_}}.dump(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const std::string id = json::parse(created->body)["id"];
  auto reply = client.Post("/sessions/" + id + "/messages", R"({"text":"hello there"})",
                           "application/json");
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->status, 200);
  EXPECT_EQ(json::parse(reply->body)["coverage"].size(), 2u);
  auto missing = client.Get("/sessions/s000777");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto removed = client.Delete("/sessions/" + id);
  ASSERT_TRUE(removed);
  EXPECT_EQ(removed->status, 200);

  service.stop();
  server.join();
}

}  // namespace
}  // namespace persona
