// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "combo/errors.hpp"
#include "combo/log.hpp"
#include "combo/providers.hpp"
#include "support.hpp"

using namespace combo;

namespace {

/// Local HTTP endpoint answering every POST with `handler(body)`.
class FixtureServer {
 public:
  explicit FixtureServer(std::function<httplib::Response(const Json&)> handler) {
    server_.Post(".*", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      last_auth_ = req.get_header_value("Authorization");
      auto out = handler(Json::parse(req.body));
      res.status = out.status;
      res.set_content(out.body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FixtureServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path = "/v1") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
  int hits() const { return hits_.load(); }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
  std::string last_auth_;
};

httplib::Response json_response(const Json& body, int status = 200) {
  httplib::Response r;
  r.status = status;
  r.body = body.dump();
  return r;
}

class ScriptedTransport : public JsonTransport {
 public:
  explicit ScriptedTransport(int failures, Json reply) : failures_(failures), reply_(std::move(reply)) {}
  Json post(const Json& body) override {
    ++calls;
    last = body;
    if (calls <= failures_) throw TransportFailure("scripted outage");
    return reply_;
  }
  std::string describe() const override { return "scripted"; }
  int calls = 0;
  Json last;

 private:
  int failures_;
  Json reply_;
};

class FixedGenerator : public Generator {
 public:
  explicit FixedGenerator(std::vector<std::vector<std::string>> items) : items_(std::move(items)) {}
  std::vector<std::vector<std::string>> generate(const GenerationRequest&) override { return items_; }

 private:
  std::vector<std::vector<std::string>> items_;
};

struct ListPredictor : Predictor {
  std::string predict(const PredictRequest&) override { return "Don Shula"; }
  std::string tag() const override { return "fixed"; }
};

ScoreRequest evidentiality_request(const std::string& retrieved) {
  ScoreRequest r;
  r.kind = ScoreKind::Evidentiality;
  r.question = "who coached the dolphins?";
  r.retrieved_text = retrieved;
  return r;
}

}  // namespace

TEST_CASE("prompt templates") {
  GenerationRequest req;
  req.question = "who won?";
  CHECK(render_prompt(req) ==
        "Provide a background document from Wikipedia to answer the given question. \n\n who won? \n\n");
  req.mode = GenerationMode::MultiHopChain;
  const auto p = render_prompt(req);
  CHECK(p.find("chain of two 100-word documents") != std::string::npos);
  CHECK(p.size() > req.question.size());
  CHECK(p.substr(p.size() - req.question.size()) == req.question);
}

TEST_CASE("multi-hop completions split into two segments") {
  const auto segs = parse_multi_hop("Document 1: A\n\nDocument 2: B");
  REQUIRE(segs.size() == 2);
  CHECK(segs[0] == "A");
  CHECK(segs[1] == "B");
  const auto quoted = parse_multi_hop("Document 1: \"first doc\"\n\n Document 2: \"second doc\"\n");
  CHECK(quoted == std::vector<std::string>{"first doc", "second doc"});
  CHECK_THROWS_AS(parse_multi_hop("Document 1: A only"), ProtocolError);
  CHECK_THROWS_AS(parse_multi_hop("Document 1: \n\nDocument 2: B"), ProtocolError);
}

TEST_CASE("generate_passages builds source-tagged chains") {
  GenerationRequest req;
  req.question = "q";
  req.num_passages = 1;
  FixedGenerator single({{"X"}});
  auto res = generate_passages(req, single, "q7");
  REQUIRE(res.chains.size() == 1);
  CHECK(res.chains[0].segments.size() == 1);
  CHECK(res.chains[0].segments[0].text == "X");
  CHECK(res.chains[0].source == Source::LlmGenerated);

  req.mode = GenerationMode::MultiHopChain;
  req.num_passages = 2;
  FixedGenerator multi({{"Document 1: A\n\nDocument 2: B"}, {"no markers here"}, {"Document 1: C\n\nDocument 2: D"}});
  res = generate_passages(req, multi, "q7");
  REQUIRE(res.chains.size() == 2);
  CHECK(res.item_errors.size() == 1);
  CHECK(res.chains[0].segments.size() == 2);
  CHECK(res.chains[1].segments[1].text == "D");
  for (const auto& c : res.chains) {
    CHECK(c.source == Source::LlmGenerated);
    for (const auto& s : c.segments) CHECK(s.source == Source::LlmGenerated);
  }
  CHECK(res.chains[0].id() != res.chains[1].id());
}

TEST_CASE("lexical mock scorer") {
  LexicalMockScorer mock;
  ScoreContext ctx{"q", 0, std::nullopt, {"Don Shula"}};
  CHECK(mock.score(evidentiality_request("head coach Don Shula won"), ctx) == 1.0);
  CHECK(mock.score(evidentiality_request("head coach won"), ctx) == 0.0);
  ScoreRequest cons = evidentiality_request("head coach Don Shula won");
  cons.kind = ScoreKind::Consistency;
  cons.generated_text = "George Halas coached them";
  ctx.lp_index = 0;
  CHECK(mock.score(cons, ctx) == 0.0);
  cons.generated_text = "it was don shula.";
  CHECK(mock.score(cons, ctx) == 1.0);
}

TEST_CASE("score requests validate their shape") {
  ScoreRequest r = evidentiality_request("text");
  r.generated_text = "unexpected";
  CHECK_THROWS_AS(r.validate(), ContractViolation);
  r.kind = ScoreKind::Consistency;
  r.generated_text.reset();
  CHECK_THROWS_AS(r.validate(), ContractViolation);
}

TEST_CASE("file score store") {
  FileScoreStore store;
  store.set_evidentiality("q1", 2, 0.73);
  store.set_consistency("q1", 1, 2, 0.25);
  ScoreContext ctx{"q1", 2, std::nullopt, {"x"}};
  CHECK(store.score(evidentiality_request("anything"), ctx) == 0.73);
  ScoreRequest cons = evidentiality_request("anything");
  cons.kind = ScoreKind::Consistency;
  cons.generated_text = "g";
  ctx.lp_index = 1;
  CHECK(store.score(cons, ctx) == 0.25);
  ctx.rp_index = 3;
  CHECK_THROWS_AS(store.score(cons, ctx), MissingScoreError);
  try {
    store.score(evidentiality_request("x"), ScoreContext{"q9", 0, std::nullopt, {"x"}});
    FAIL("expected MissingScoreError");
  } catch (const MissingScoreError& e) {
    CHECK(std::string(e.what()).find("q9") != std::string::npos);
  }
}

TEST_CASE("probabilities are clamped with a warning") {
  set_warnings_quiet(true);
  const auto before = warning_count();
  CHECK(clamp_probability(1.5, "t") == 1.0);
  CHECK(clamp_probability(-0.2, "t") == 0.0);
  CHECK(clamp_probability(0.4, "t") == 0.4);
  CHECK(warning_count() == before + 2);
  CHECK_THROWS_AS(clamp_probability(std::nan(""), "t"), ProtocolError);
  set_warnings_quiet(false);
}

TEST_CASE("retry with exponential backoff, then fail the item") {
  RetryPolicy fast{3, std::chrono::milliseconds(1)};
  ScriptedTransport flaky(2, Json{{"probability", 0.9}});
  CHECK(post_with_retry(flaky, Json::object(), fast)["probability"] == 0.9);
  CHECK(flaky.calls == 3);

  ScriptedTransport down(10, Json::object());
  try {
    post_with_retry(down, Json::object(), fast);
    FAIL("expected RetryableError");
  } catch (const RetryableError& e) {
    CHECK(e.attempts() == 3);
  }
  CHECK(down.calls == 3);
}

TEST_CASE("response cache persists across instances") {
  testing::TempDir dir("cache");
  const auto key = ResponseCache::key_for("score/x", Json{{"a", 1}});
  CHECK(key.size() == 64);
  CHECK(key == ResponseCache::key_for("score/x", Json{{"a", 1}}));
  CHECK(key != ResponseCache::key_for("score/y", Json{{"a", 1}}));
  {
    ResponseCache cache(dir.path());
    CHECK_FALSE(cache.get(key));
    cache.put(key, Json{{"probability", 0.125}});
  }
  ResponseCache reopened(dir.path());
  REQUIRE(reopened.get(key));
  CHECK((*reopened.get(key))["probability"] == 0.125);
  CHECK(reopened.size() == 1);
}

TEST_CASE("cached scorer answers repeats from the cache") {
  testing::TempDir dir("cached-scorer");
  auto transport = std::make_shared<ScriptedTransport>(0, Json{{"probability", 0.8125}});
  auto cache = std::make_shared<ResponseCache>(dir.path());
  CachedScorer scorer(std::make_shared<RemoteScorer>(transport), cache);
  ScoreContext ctx{"q", 0, std::nullopt, {"a"}};
  const double first = scorer.score(evidentiality_request("t"), ctx);
  const double second = scorer.score(evidentiality_request("t"), ctx);
  CHECK(first == 0.8125);
  CHECK(first == second);
  CHECK(transport->calls == 1);
  CHECK(transport->last == Json{{"kind", "evidentiality"},
                                {"question", "who coached the dolphins?"},
                                {"retrieved", "t"},
                                {"generated", nullptr}});

  CachedScorer fresh(std::make_shared<RemoteScorer>(transport), std::make_shared<ResponseCache>(dir.path()));
  CHECK(fresh.score(evidentiality_request("t"), ctx) == first);
  CHECK(transport->calls == 1);
}

TEST_CASE("cached predictor keys on passage ids") {
  testing::TempDir dir("cached-predictor");
  auto inner = std::make_shared<CountingPredictor>(std::make_shared<ListPredictor>());
  CachedPredictor p(inner, std::make_shared<ResponseCache>(dir.path()));
  PredictRequest req{"q", {"a", "b"}, {"R:1", "R:2"}};
  CHECK(p.predict(req) == "Don Shula");
  CHECK(p.predict(req) == "Don Shula");
  CHECK(inner->calls() == 1);
  req.passage_ids = {"R:1", "L:2"};
  p.predict(req);
  CHECK(inner->calls() == 2);
  CHECK(req.to_wire() == Json{{"question", "q"}, {"passages", {"a", "b"}}});
}

TEST_CASE("remote predictor over HTTP") {
  FixtureServer server([](const Json& body) {
    CHECK(body.contains("question"));
    CHECK(body["passages"].is_array());
    return json_response(Json{{"answer", "Don Shula"}});
  });
  RemotePredictor predictor(std::make_shared<HttpTransport>(server.url(), "sekrit"));
  CHECK(predictor.predict(PredictRequest{"who coached?", {"question: who coached? retrieved passage: x"}, {}}) ==
        "Don Shula");
  CHECK(server.last_auth() == "Bearer sekrit");
}

TEST_CASE("remote errors are classified") {
  SUBCASE("server errors are retried") {
    FixtureServer server([](const Json&) { return json_response(Json{{"error", "busy"}}, 503); });
    RemotePredictor predictor(std::make_shared<HttpTransport>(server.url()), {2, std::chrono::milliseconds(1)});
    CHECK_THROWS_AS(predictor.predict(PredictRequest{"q", {"p"}, {}}), RetryableError);
    CHECK(server.hits() == 2);
  }
  SUBCASE("malformed responses are protocol errors") {
    FixtureServer server([](const Json&) { return json_response(Json{{"text", "no answer field"}}); });
    RemotePredictor predictor(std::make_shared<HttpTransport>(server.url()));
    CHECK_THROWS_AS(predictor.predict(PredictRequest{"q", {"p"}, {}}), ProtocolError);
    CHECK(server.hits() == 1);
  }
  SUBCASE("client errors are not retried") {
    FixtureServer server([](const Json&) { return json_response(Json::object(), 400); });
    RemoteScorer scorer(std::make_shared<HttpTransport>(server.url()), {3, std::chrono::milliseconds(1)});
    CHECK_THROWS_AS(scorer.score(evidentiality_request("t"), ScoreContext{"q", 0, std::nullopt, {"a"}}),
                    ProtocolError);
    CHECK(server.hits() == 1);
  }
  SUBCASE("unreachable endpoints exhaust the retries") {
    RemotePredictor predictor(std::make_shared<HttpTransport>("http://127.0.0.1:1/x", "", std::chrono::seconds(1)),
                              {2, std::chrono::milliseconds(1)});
    CHECK_THROWS_AS(predictor.predict(PredictRequest{"q", {"p"}, {}}), RetryableError);
  }
}

TEST_CASE("remote generator over HTTP") {
  FixtureServer server([](const Json& body) {
    CHECK(body["mode"] == "multi_hop_chain");
    CHECK(body["n"] == 2);
    return json_response(Json{{"passages", {"Document 1: A\n\nDocument 2: B", {"Document 1: C", "Document 2: D"}}}});
  });
  RemoteGenerator gen(std::make_shared<HttpTransport>(server.url()));
  GenerationRequest req{"which team?", 2, GenerationMode::MultiHopChain};
  const auto res = generate_passages(req, gen, "h1");
  REQUIRE(res.chains.size() == 2);
  CHECK(res.chains[1].segments[0].text == "C");
  CHECK(res.chains[1].segments[1].text == "D");
}
