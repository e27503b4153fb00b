#include "webtwin/backend.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "webtwin/util.hpp"

namespace webtwin::backend {

using nlohmann::json;

const char* to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::Transport: return "Transport";
    case BackendErrorKind::Protocol: return "Protocol";
    case BackendErrorKind::ReplayMiss: return "ReplayMiss";
    case BackendErrorKind::Truncated: return "Truncated";
  }
  return "?";
}

BackendError::BackendError(BackendErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

std::string fingerprint(const GenRequest& req) {
  util::Fnv64 h;
  auto field = [&h](std::string_view s) {
    h.bytes(std::to_string(s.size()));
    h.byte('|');
    h.bytes(s);
    h.byte('|');
  };
  field(req.system);
  h.bytes(std::to_string(req.messages.size()));
  for (const Message& m : req.messages) {
    field(m.role);
    field(m.content);
  }
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.2f", req.temperature);
  field(temp);
  return h.hex();
}

AuditLog::AuditLog(const std::string& path) : path_(path) {
  std::ofstream out(path_, std::ios::trunc);  // start a fresh trail per run
}

void AuditLog::record(const GenRequest& req, const std::string& fp, const GenResult& result) {
  json messages = json::array();
  for (const Message& m : req.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  json entry = {
      {"tag", req.tag},
      {"fingerprint", fp},
      {"request",
       {{"system", req.system},
        {"messages", messages},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens}}},
      {"response", result.text},
      {"latency_ms", result.latency_ms},
  };
  std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  out << entry.dump() << '\n';
}

namespace {

std::map<std::string, std::string> load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BackendError(BackendErrorKind::Transport, "cannot open replay script: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("fingerprint") || !record.contains("response"))
      throw BackendError(BackendErrorKind::Protocol,
                         "bad replay record at " + path + ":" + std::to_string(line_no));
    out[record["fingerprint"].get<std::string>()] = record["response"].get<std::string>();
  }
  return out;
}

}  // namespace

ReplayBackend::ReplayBackend(const std::string& script_path, std::shared_ptr<AuditLog> audit)
    : responses_(load_script(script_path)), audit_(std::move(audit)) {}

ReplayBackend::ReplayBackend(std::map<std::string, std::string> responses,
                             std::shared_ptr<AuditLog> audit)
    : responses_(std::move(responses)), audit_(std::move(audit)) {}

GenResult ReplayBackend::generate(const GenRequest& req) {
  std::string fp = fingerprint(req);
  auto it = responses_.find(fp);
  if (it == responses_.end()) {
    std::string ctx = req.messages.empty() ? "" : req.messages.back().content;
    throw BackendError(BackendErrorKind::ReplayMiss,
                       "no scripted response for fingerprint " + fp + " (tag=" + req.tag +
                           ", last message: " + ctx.substr(0, 160) + ")");
  }
  GenResult result;
  result.text = it->second;
  result.usage.prompt_tokens = 0;
  result.usage.completion_tokens = 0;
  result.latency_ms = 0;
  if (audit_) audit_->record(req, fp, result);
  return result;
}

RemoteBackend::RemoteBackend(BackendSpec spec, std::shared_ptr<AuditLog> audit)
    : spec_(std::move(spec)), audit_(std::move(audit)) {}

GenResult RemoteBackend::generate(const GenRequest& req) {
  json messages = json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  for (const Message& m : req.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  json body = {
      {"model", spec_.model},
      {"messages", messages},
      {"temperature", req.temperature},
      {"max_tokens", req.max_tokens},
  };
  if (!req.stop_sequences.empty()) body["stop"] = req.stop_sequences;
  std::string payload = body.dump();

  // Split endpoint into host part and path prefix.
  std::string base = spec_.endpoint;
  std::string prefix;
  size_t scheme = base.find("://");
  size_t slash = scheme == std::string::npos ? base.find('/') : base.find('/', scheme + 3);
  if (slash != std::string::npos) {
    prefix = base.substr(slash);
    base = base.substr(0, slash);
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  std::string path = prefix + "/chat/completions";

  std::string last_error;
  for (int attempt = 1; attempt <= spec_.retry.max_attempts; ++attempt) {
    if (attempt > 1)
      std::this_thread::sleep_for(std::chrono::milliseconds(spec_.retry.backoff_ms * (attempt - 1)));

    auto start = std::chrono::steady_clock::now();
    httplib::Client client(base);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!spec_.auth_token.empty())
      headers.emplace("Authorization", "Bearer " + spec_.auth_token);
    auto res = client.Post(path, headers, payload, "application/json");
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();

    if (!res) {
      last_error = "no response from " + base + path;
      continue;
    }
    if (res->status >= 500) {
      last_error = "server status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw BackendError(BackendErrorKind::Protocol,
                         "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));

    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
      throw BackendError(BackendErrorKind::Protocol, "malformed completion body");
    const json& choice = reply["choices"][0];
    if (choice.value("finish_reason", "") == "length")
      throw BackendError(BackendErrorKind::Truncated,
                         "completion hit max_tokens=" + std::to_string(req.max_tokens));
    if (!choice.contains("message") || !choice["message"].contains("content"))
      throw BackendError(BackendErrorKind::Protocol, "choice missing message content");

    GenResult result;
    result.text = choice["message"]["content"].get<std::string>();
    if (reply.contains("usage")) {
      result.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
      result.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
    }
    result.latency_ms = static_cast<long>(elapsed);
    if (audit_) audit_->record(req, fingerprint(req), result);
    return result;
  }
  throw BackendError(BackendErrorKind::Transport,
                     "gave up after " + std::to_string(spec_.retry.max_attempts) +
                         " attempts: " + last_error);
}

GenResult CallbackBackend::generate(const GenRequest& req) {
  GenResult result;
  result.text = fn_(req);
  return result;
}

GenResult RecordingBackend::generate(const GenRequest& req) {
  GenResult result = inner_->generate(req);
  std::string fp = fingerprint(req);
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = recorded_.emplace(fp, result.text);
  if (!inserted && it->second != result.text)
    throw BackendError(BackendErrorKind::Protocol,
                       "recording conflict: fingerprint " + fp +
                           " produced two different responses");
  return result;
}

void RecordingBackend::save_script(const std::string& path) const {
  std::string out;
  for (const auto& [fp, response] : recorded_) {
    json record = {{"fingerprint", fp}, {"response", response}};
    out += record.dump();
    out += '\n';
  }
  util::write_file(path, out);
}

std::shared_ptr<TextBackend> make_backend(const BackendSpec& spec,
                                          std::shared_ptr<AuditLog> audit) {
  if (spec.kind == BackendKind::Replay)
    return std::make_shared<ReplayBackend>(spec.script_path, std::move(audit));
  return std::make_shared<RemoteBackend>(spec, std::move(audit));
}

}  // namespace webtwin::backend
