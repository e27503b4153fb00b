#include "webtwin/backend.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "webtwin/util.hpp"

using namespace webtwin;
using backend::BackendError;
using backend::BackendErrorKind;
using backend::GenRequest;
using nlohmann::json;

namespace {

GenRequest simple_request(const std::string& content, double temperature = 0.0) {
  GenRequest req;
  req.system = "sys";
  req.messages.push_back({"user", content});
  req.temperature = temperature;
  return req;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "webtwin_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("fingerprint is stable and scoped to what matters") {
  GenRequest a = simple_request("hello");
  GenRequest b = simple_request("hello");
  CHECK(backend::fingerprint(a) == backend::fingerprint(b));

  b.tag = "world";
  b.max_tokens = 9;
  b.stop_sequences = {"x"};
  CHECK(backend::fingerprint(a) == backend::fingerprint(b));  // tag/limits ignored

  GenRequest c = simple_request("hello!");
  CHECK(backend::fingerprint(a) != backend::fingerprint(c));

  GenRequest warm = simple_request("hello", 0.7);
  CHECK(backend::fingerprint(a) != backend::fingerprint(warm));
  GenRequest rounded = simple_request("hello", 0.699);
  CHECK(backend::fingerprint(warm) == backend::fingerprint(rounded));  // 2-decimal rounding
}

TEST_CASE("fingerprint brute-force collision scan over 1000 distinct requests") {
  std::set<std::string> digests;
  for (int i = 0; i < 1000; ++i) {
    GenRequest req = simple_request("message number " + std::to_string(i));
    if (i % 3 == 0) req.messages.push_back({"assistant", "reply " + std::to_string(i)});
    digests.insert(backend::fingerprint(req));
  }
  CHECK(digests.size() == 1000);
}

TEST_CASE("replay backend is a fingerprint lookup") {
  GenRequest req = simple_request("what now");
  std::map<std::string, std::string> script{
      {backend::fingerprint(req), "Thought: t Action: ```click [2]```"}};
  backend::ReplayBackend replay(script);

  CHECK(replay.generate(req).text == "Thought: t Action: ```click [2]```");
  CHECK(replay.generate(req).latency_ms == 0);

  GenRequest other = simple_request("unknown");
  try {
    replay.generate(other);
    FAIL("expected ReplayMiss");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendErrorKind::ReplayMiss);
    CHECK(std::string(e.what()).find(backend::fingerprint(other)) != std::string::npos);
  }
}

TEST_CASE("replay script file round trip") {
  auto path = temp_file("replay_script.jsonl");
  GenRequest req = simple_request("scripted");
  {
    std::ofstream out(path);
    json record = {{"fingerprint", backend::fingerprint(req)}, {"response", "hello\nworld"}};
    out << record.dump() << "\n";
  }
  backend::ReplayBackend replay(path.string());
  CHECK(replay.generate(req).text == "hello\nworld");
}

TEST_CASE("replay backend is safe under concurrent use") {
  GenRequest req = simple_request("parallel");
  std::map<std::string, std::string> script{{backend::fingerprint(req), "ok"}};
  backend::ReplayBackend replay(script);

  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 200; ++i)
        if (replay.generate(req).text != "ok") ++failures;
    });
  for (auto& t : threads) t.join();
  CHECK(failures == 0);
}

TEST_CASE("recording backend rejects conflicting responses") {
  int calls = 0;
  auto inner = std::make_shared<backend::CallbackBackend>(
      [&calls](const GenRequest&) { return "reply " + std::to_string(calls++); });
  backend::RecordingBackend recorder(inner);
  GenRequest req = simple_request("same");
  recorder.generate(req);
  CHECK_THROWS_AS(recorder.generate(req), BackendError);  // same fp, new text
}

TEST_CASE("remote backend speaks the chat-completion protocol") {
  httplib::Server server;
  std::atomic<int> hits{0};
  json last_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    last_body = json::parse(req.body);
    std::string content = last_body["messages"].back()["content"].get<std::string>();
    json reply = {
        {"choices",
         json::array({{{"message", {{"role", "assistant"}, {"content", "echo: " + content}}},
                       {"finish_reason", "stop"}}})},
        {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 4}}},
    };
    res.set_content(reply.dump(), "application/json");
  });

  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  backend::BackendSpec spec;
  spec.kind = backend::BackendKind::Remote;
  spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  spec.model = "stub-model";
  spec.auth_token = "sekrit";

  backend::RemoteBackend remote(spec);
  GenRequest req = simple_request("ping");
  backend::GenResult first = remote.generate(req);
  CHECK(first.text == "echo: ping");
  CHECK(first.usage.prompt_tokens == 12);
  CHECK(last_body["model"] == "stub-model");
  CHECK(last_body["messages"][0]["role"] == "system");

  // Deterministic stub: temperature-0 requests give identical texts.
  backend::GenResult second = remote.generate(req);
  CHECK(second.text == first.text);
  CHECK(hits == 2);

  server.stop();
  server_thread.join();
}

TEST_CASE("remote backend retries transient errors and surfaces truncation") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    int n = ++hits;
    if (n == 1) {
      res.status = 500;
      res.set_content("transient", "text/plain");
      return;
    }
    json reply = {
        {"choices",
         json::array({{{"message", {{"role", "assistant"}, {"content", "partial"}}},
                       {"finish_reason", n == 2 ? "stop" : "length"}}})},
    };
    res.set_content(reply.dump(), "application/json");
  });

  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  backend::BackendSpec spec;
  spec.kind = backend::BackendKind::Remote;
  spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  spec.retry.backoff_ms = 1;

  backend::RemoteBackend remote(spec);
  CHECK(remote.generate(simple_request("a")).text == "partial");  // 500 then 200
  CHECK(hits == 2);

  try {
    remote.generate(simple_request("b"));
    FAIL("expected Truncated");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendErrorKind::Truncated);
  }

  server.stop();
  server_thread.join();
}

TEST_CASE("audit log captures the full request/response pair") {
  auto path = temp_file("audit.jsonl");
  auto audit = std::make_shared<backend::AuditLog>(path.string());
  GenRequest req = simple_request("logged");
  req.tag = "policy";
  std::map<std::string, std::string> script{{backend::fingerprint(req), "reply"}};
  backend::ReplayBackend replay(script, audit);
  replay.generate(req);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  json entry = json::parse(line);
  CHECK(entry["tag"] == "policy");
  CHECK(entry["fingerprint"] == backend::fingerprint(req));
  CHECK(entry["request"]["messages"][0]["content"] == "logged");
  CHECK(entry["response"] == "reply");
}
