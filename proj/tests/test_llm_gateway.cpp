// Copyright 2026 The decotune Authors
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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <thread>

#include <gtest/gtest.h>

#include "decotune/llm_gateway.hpp"
#include "decotune/moe_selection.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

// Last: resolv.h, pulled in by httplib, defines a `_res` macro that breaks Eigen.
#include <httplib.h>

using namespace decotune;
using nlohmann::json;

namespace {

PromptRequest sample_request() {
  PromptRequest r;
  r.role_preamble = "You are an expert.";
  r.body = "Score   the knob.\n\n Format: {\"score\": <1-100>, \"reason\": \"...\"}";
  r.response_schema = "expert_score";
  return r;
}

// Minimal chat-completions endpoint that answers from a script.
class StubEndpoint {
 public:
  explicit StubEndpoint(std::vector<std::string> contents) : contents_(std::move(contents)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      bodies_.push_back(json::parse(req.body));
      const std::size_t i = std::min(calls_++, contents_.size() - 1);
      json envelope{{"choices", json::array({{{"message", {{"role", "assistant"},
                                                           {"content", contents_[i]}}}}})}};
      res.set_content(envelope.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t calls() const { return calls_; }
  const std::vector<json>& bodies() const { return bodies_; }

 private:
  httplib::Server server_;
  std::vector<std::string> contents_;
  std::vector<json> bodies_;
  std::atomic<std::size_t> calls_{0};
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Canonical, WhitespaceAndKeyOrderDoNotChangeTheKey) {
  PromptRequest a = sample_request();
  PromptRequest b = a;
  b.body = "  Score the knob.\n Format: {\"score\": <1-100>, \"reason\": \"...\"}  ";
  EXPECT_EQ(request_key(a), request_key(b));
  EXPECT_EQ(request_key(a).size(), 64u);
  b.body = "Score the other knob.";
  EXPECT_NE(request_key(a), request_key(b));
  b = a;
  b.response_schema = "manager_classification";
  EXPECT_NE(request_key(a), request_key(b));
  EXPECT_EQ(normalize_whitespace("  a \t\n b  "), "a b");
}

TEST(Schemas, ExpertScore) {
  EXPECT_FALSE(validate_response("expert_score", json{{"score", 85}, {"reason", "r"}}));
  EXPECT_TRUE(validate_response("expert_score", json{{"score", 0}, {"reason", "r"}}));
  EXPECT_TRUE(validate_response("expert_score", json{{"score", 85.5}, {"reason", "r"}}));
  EXPECT_TRUE(validate_response("expert_score", json{{"score", 85}}));
  EXPECT_TRUE(validate_response("expert_score", json::array()));
}

TEST(Schemas, ManagerAndObjectiveAndKnowledge) {
  EXPECT_FALSE(validate_response("manager_classification",
                                 json{{"categories", {{"Disk", 0.4}, {"QueryOptimization", 0.6}}}}));
  EXPECT_TRUE(validate_response("manager_classification", json{{"categories", {{"Network", 1.0}}}}));
  EXPECT_FALSE(validate_response("objective_weights", json{{"w_tps", 0.4}, {"w_lat", 0.6}}));
  EXPECT_TRUE(validate_response("objective_weights", json{{"w_tps", 0.4}, {"w_lat", 0.4}}));
  EXPECT_FALSE(validate_response("knob_knowledge", json{{"D", "d"}, {"L", "1"}, {"U", "10"}}));
  EXPECT_TRUE(validate_response("knob_knowledge", json{{"L", "1"}}));
  EXPECT_TRUE(validate_response("no_such_schema", json::object()));
}

TEST(Replay, ReturnsTheRecordedValue) {
  const auto ctx = test_support::htap_context();
  const auto answers = test_support::random_page_cost_answers(ctx);
  auto gw = test_support::scripted_gateway(answers);
  const Completion c = gw->complete(answers[2].first);
  EXPECT_EQ(c.value.at("score"), 85);
  EXPECT_EQ(c.retry_count, 0);
  EXPECT_EQ(c.key, request_key(answers[2].first));
}

TEST(Replay, MissingFixtureIsAnError) {
  auto gw = test_support::scripted_gateway({});
  EXPECT_THROW(gw->complete(sample_request()), MissingFixture);
}

TEST(Replay, FixtureStoreRoundTripsThroughDisk) {
  const auto dir = oracle::temp_dir("fixtures");
  FixtureStore store;
  store.insert(sample_request(), json{{"score", 42}, {"reason", "why"}});
  store.save(dir / "f.json");
  EXPECT_TRUE(std::filesystem::exists(FixtureStore::sidecar_path(dir / "f.json")));
  const auto loaded = FixtureStore::load(dir / "f.json");
  ASSERT_NE(loaded.find(request_key(sample_request())), nullptr);
  EXPECT_EQ(loaded.find(request_key(sample_request()))->at("score"), 42);
}

TEST(Retry, MalformedThenValidCountsOneRetry) {
  auto transport = std::make_unique<test_support::SequenceTransport>(
      std::vector<std::string>{"sure! {score: 85", R"({"score": 85, "reason": "ok"})"});
  auto* raw = transport.get();
  LlmGateway gw(std::move(transport), 2);
  const Completion c = gw.complete(sample_request());
  EXPECT_EQ(c.retry_count, 1);
  EXPECT_EQ(c.value.at("score"), 85);
  ASSERT_EQ(raw->repairs.size(), 2u);
  EXPECT_FALSE(raw->repairs[0].has_value());
  ASSERT_TRUE(raw->repairs[1].has_value());
  EXPECT_NE(raw->repairs[1]->find("expert_score"), std::string::npos);
}

TEST(Retry, SchemaViolationsExhaustRetries) {
  LlmGateway gw(std::make_unique<test_support::SequenceTransport>(std::vector<std::string>(
                    3, R"({"score": 500, "reason": "too high"})")),
                2);
  EXPECT_THROW(gw.complete(sample_request()), SchemaError);
}

TEST(Retry, TransportFailuresSurfaceAsTransportError) {
  LlmGateway gw(std::make_unique<test_support::SequenceTransport>(std::vector<std::string>{}), 1);
  EXPECT_THROW(gw.complete(sample_request()), TransportError);
}

TEST(Retry, ReplyInsideCodeFenceIsAccepted) {
  LlmGateway gw(std::make_unique<test_support::SequenceTransport>(std::vector<std::string>{
                    "```json\n{\"score\": 7, \"reason\": \"fenced\"}\n```"}),
                0);
  EXPECT_EQ(gw.complete(sample_request()).value.at("score"), 7);
}

TEST(Live, StubEndpointMalformedOnceThenValid) {
  StubEndpoint stub({"not json at all", R"({"score": 85, "reason": "cost model"})"});
  LlmGateway gw(std::make_unique<HttpTransport>(stub.url(), "stub-model", "secret", 5.0), 2);
  const Completion c = gw.complete(sample_request());
  EXPECT_EQ(c.retry_count, 1);
  EXPECT_EQ(c.value.at("score"), 85);
  ASSERT_EQ(stub.calls(), 2u);
  const json& first = stub.bodies().at(0);
  EXPECT_EQ(first.at("model"), "stub-model");
  EXPECT_EQ(first.at("messages").at(0).at("role"), "system");
  // The retry carries the repair note.
  const std::string second_body = stub.bodies().at(1).at("messages").at(1).at("content");
  EXPECT_NE(second_body.find("rejected"), std::string::npos);
}

TEST(Live, RecordsAcceptedResponsesAsFixtures) {
  const auto dir = oracle::temp_dir("record");
  StubEndpoint stub({R"({"score": 64, "reason": "recorded"})"});
  {
    LlmGateway gw(std::make_unique<HttpTransport>(stub.url(), "m", "", 5.0), 0,
                  dir / "rec.json");
    gw.complete(sample_request());
  }
  LlmGateway replay(std::make_unique<ReplayTransport>(FixtureStore::load(dir / "rec.json")), 0);
  EXPECT_EQ(replay.complete(sample_request()).value.at("score"), 64);
}

TEST(Live, UnreachableEndpointIsTransportError) {
  LlmGateway gw(std::make_unique<HttpTransport>("http://127.0.0.1:1", "m", "", 1.0), 1);
  EXPECT_THROW(gw.complete(sample_request()), TransportError);
}

TEST(Config, ResolvesRelativePathsAgainstTheConfigFile) {
  const auto dir = oracle::temp_dir("gwcfg");
  oracle::write_file(dir / "gw.json", R"({"mode": "replay", "fixture_path": "fx.json"})");
  const auto cfg = GatewayConfig::load(dir / "gw.json");
  EXPECT_EQ(cfg.mode, GatewayMode::replay);
  EXPECT_EQ(cfg.fixture_path, dir / "fx.json");
  EXPECT_THROW(GatewayConfig::from_json(json{{"mode", "live"}}).check(), Error);
}
