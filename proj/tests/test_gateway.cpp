#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/llm.hpp"
#include "llmreg/llm_live.hpp"
#include "llmreg/llm_mock.hpp"
#include "llmreg/llm_replay.hpp"

using namespace llmreg;
namespace fs = std::filesystem;

namespace {

LlmRequest make_request(const std::string& prompt, int rep = 0,
                        PromptTag tag = PromptTag::categorize) {
  LlmRequest r;
  r.prompt = prompt;
  r.repetition_index = rep;
  r.tag = tag;
  return r;
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("request hash is stable and keyed on every field") {
  const LlmRequest base = make_request("hello", 0);
  CHECK(request_hash(base) == request_hash(base));

  LlmRequest different = base;
  different.repetition_index = 1;
  CHECK(request_hash(base) != request_hash(different));

  different = base;
  different.prompt = "hello!";
  CHECK(request_hash(base) != request_hash(different));

  different = base;
  different.temperature = 0.7;
  CHECK(request_hash(base) != request_hash(different));

  different = base;
  different.tag = PromptTag::discover;
  CHECK(request_hash(base) != request_hash(different));
}

TEST_CASE("request validation enforces parameter ranges") {
  LlmRequest r = make_request("x");
  r.temperature = 2.5;
  CHECK_THROWS_AS(validate_request(r), InvalidArgument);
  r.temperature = 0.5;
  r.top_p = 0.0;
  CHECK_THROWS_AS(validate_request(r), InvalidArgument);
  r.top_p = 1.0;
  r.repetition_index = -1;
  CHECK_THROWS_AS(validate_request(r), InvalidArgument);
}

TEST_CASE("replay provider answers from the store and reports misses") {
  const LlmRequest request = make_request("the prompt", 2);
  ReplayStore store;
  store.append({request_hash(request), "stored answer", "test", ""});

  ReplayProvider provider(store);
  CHECK(provider.complete(request) == "stored answer");

  const LlmRequest missing = make_request("another prompt");
  try {
    provider.complete(missing);
    FAIL("expected ReplayMissError");
  } catch (const ReplayMissError& e) {
    CHECK(e.missing_hash == request_hash(missing));
  }
}

TEST_CASE("replay store JSONL round-trips and merges") {
  ReplayStore a;
  a.append({"h1", "r1", "p", ""});
  a.append({"h2", "r2", "p", ""});
  ReplayStore b;
  b.append({"h3", "r3", "p", ""});
  b.append({"h2", "r2", "p", ""});  // identical duplicate

  const std::string path_a = temp_path("llmreg_store_a.jsonl");
  const std::string path_b = temp_path("llmreg_store_b.jsonl");
  a.save(path_a);
  b.save(path_b);

  const ReplayStore merged = ReplayStore::merge({path_a, path_b});
  CHECK(merged.size() == 3);
  CHECK(merged.find("h1").value() == "r1");
  CHECK(merged.find("h3").value() == "r3");

  ReplayStore conflicting;
  conflicting.append({"h2", "DIFFERENT", "p", ""});
  const std::string path_c = temp_path("llmreg_store_c.jsonl");
  conflicting.save(path_c);
  CHECK_THROWS_WITH_AS(ReplayStore::merge({path_a, path_b, path_c}),
                       doctest::Contains("h2"), ParseError);

  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
  std::remove(path_c.c_str());
}

TEST_CASE("mock provider scripts responses by tag, repetition and prompt") {
  MockProvider mock;
  mock.add_rule({PromptTag::categorize, 0, "", "Answer: Type A"});
  mock.add_rule({PromptTag::categorize, std::nullopt, "nightlight", "Answer: Type B"});
  mock.set_fallback("Answer: Type C");

  CHECK(mock.complete(make_request("anything", 0)) == "Answer: Type A");
  CHECK(mock.complete(make_request("about nightlight here", 3)) == "Answer: Type B");
  CHECK(mock.complete(make_request("anything", 4)) == "Answer: Type C");
}

TEST_CASE("mock provider without fallback raises transport errors") {
  MockProvider mock;
  mock.add_rule({PromptTag::discover, std::nullopt, "", "New column 1: x | y"});
  CHECK_THROWS_AS(mock.complete(make_request("prompt", 0, PromptTag::categorize)),
                  TransportError);
}

TEST_CASE("mock script parses from JSON") {
  const MockProvider mock = MockProvider::from_json(R"({
    "fallback": "Answer: Type C",
    "rules": [
      {"tag": "categorize", "repetition_index": 1, "response": "Answer: Type A"},
      {"prompt_contains": "area", "response": "Answer: Type B"}
    ]
  })");
  MockProvider copy = mock;
  CHECK(copy.complete(make_request("x", 1)) == "Answer: Type A");
  CHECK(copy.complete(make_request("the area module", 0)) == "Answer: Type B");
  CHECK(copy.complete(make_request("x", 0)) == "Answer: Type C");
}

TEST_CASE("recording provider captures one transcript per call") {
  MockProvider mock;
  mock.set_fallback("recorded response");
  ReplayStore sink;
  RecordingProvider recorder(mock, sink);

  const LlmRequest request = make_request("prompt", 1);
  CHECK(recorder.complete(request) == "recorded response");
  CHECK(recorder.complete(request) == "recorded response");  // dedup: same hash+response
  CHECK(sink.size() == 1);

  // replaying the recorded session reproduces the response with no provider
  ReplayProvider replay(sink);
  CHECK(replay.complete(request) == "recorded response");
}

TEST_CASE("live provider talks to a chat endpoint and retries") {
  std::atomic<int> hits{0};
  httplib::Server server;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const int attempt = ++hits;
    if (attempt == 1) {
      res.status = 500;  // first attempt fails, retry should recover
      res.set_content("transient", "text/plain");
      return;
    }
    nlohmann::json reply;
    reply["choices"] = nlohmann::json::array({
        {{"message",
          {{"role", "assistant"},
           {"content", "echo:" + body.at("messages").at(0).at("content").get<std::string>() +
                           ":" + body.at("model").get<std::string>()}}}},
    });
    res.set_content(reply.dump(), "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  LiveConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.model = "test-model";
  config.auth_env = "";  // no credential for the local fixture
  config.max_retries = 3;
  config.backoff_base_seconds = 0.01;
  LiveProvider provider(config);

  ReplayStore sink;
  RecordingProvider recorder(provider, sink);
  const LlmRequest request = make_request("ping", 0);
  CHECK(recorder.complete(request) == "echo:ping:test-model");
  CHECK(hits.load() == 2);
  CHECK(sink.size() == 1);

  // exhausting retries surfaces a transport error
  LiveConfig bad = config;
  bad.base_url = "http://127.0.0.1:1";  // nothing listens there
  bad.max_retries = 2;
  bad.backoff_base_seconds = 0.0;
  LiveProvider unreachable(bad);
  CHECK_THROWS_AS(unreachable.complete(request), TransportError);

  server.stop();
  server_thread.join();
}

TEST_CASE("replay store tolerates concurrent reads while appending") {
  ReplayStore store;
  for (int i = 0; i < 64; ++i) {
    store.append({"seed" + std::to_string(i), "r", "p", ""});
  }
  std::atomic<bool> failed{false};
  std::thread reader([&] {
    for (int round = 0; round < 200; ++round) {
      if (!store.find("seed1").has_value()) failed = true;
    }
  });
  std::thread writer([&] {
    for (int i = 0; i < 200; ++i) {
      store.append({"w" + std::to_string(i), "r", "p", ""});
    }
  });
  reader.join();
  writer.join();
  CHECK_FALSE(failed.load());
  CHECK(store.size() == 264);
}

TEST_CASE("malformed store and script files raise parse errors") {
  CHECK_THROWS_AS(ReplayStore::parse_jsonl("{\"response\": \"no hash\"}\n", "mem"),
                  ParseError);
  CHECK_THROWS_AS(ReplayStore::parse_jsonl("not json at all\n", "mem"), ParseError);
  CHECK_THROWS_AS(MockProvider::from_json(R"({"rules": [{"tag": "categorize"}]})"),
                  ParseError);
  CHECK_THROWS_AS(MockProvider::from_json("["), ParseError);
}
