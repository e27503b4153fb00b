#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace webtwin::backend {

struct Message {
  std::string role;  // "user" | "assistant"
  std::string content;
};

struct GenRequest {
  std::string system;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 2048;
  std::vector<std::string> stop_sequences;
  std::string tag;  // policy|world|judge|scorer, for logging only
};

struct GenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct GenResult {
  std::string text;
  GenUsage usage;
  long latency_ms = 0;
};

enum class BackendKind { Remote, Replay };

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_ms = 50;
};

struct BackendSpec {
  BackendKind kind = BackendKind::Replay;
  // remote
  std::string endpoint;  // base URL, e.g. http://host:port/v1
  std::string model;
  std::string auth_token;  // resolved bearer token; may be empty
  RetryPolicy retry;
  // replay
  std::string script_path;
};

enum class BackendErrorKind { Transport, Protocol, ReplayMiss, Truncated };

const char* to_string(BackendErrorKind kind);

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, const std::string& message);
  BackendErrorKind kind() const { return kind_; }

 private:
  BackendErrorKind kind_;
};

// Stable digest over (system, messages, temperature rounded to 2 decimals).
// Insensitive to tag, max_tokens and stop sequences.
std::string fingerprint(const GenRequest& req);

// JSONL audit trail: {tag, fingerprint, request, response, latency_ms}.
class AuditLog {
 public:
  explicit AuditLog(const std::string& path);
  void record(const GenRequest& req, const std::string& fp, const GenResult& result);

 private:
  std::string path_;
  std::mutex mutex_;
};

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual GenResult generate(const GenRequest& req) = 0;
};

// Scripted replay keyed by request fingerprint; loaded once, read-only.
class ReplayBackend : public TextBackend {
 public:
  explicit ReplayBackend(const std::string& script_path,
                         std::shared_ptr<AuditLog> audit = nullptr);
  explicit ReplayBackend(std::map<std::string, std::string> responses,
                         std::shared_ptr<AuditLog> audit = nullptr);
  GenResult generate(const GenRequest& req) override;

 private:
  std::map<std::string, std::string> responses_;
  std::shared_ptr<AuditLog> audit_;
};

// HTTP JSON chat-completion client.
class RemoteBackend : public TextBackend {
 public:
  explicit RemoteBackend(BackendSpec spec, std::shared_ptr<AuditLog> audit = nullptr);
  GenResult generate(const GenRequest& req) override;

 private:
  BackendSpec spec_;
  std::shared_ptr<AuditLog> audit_;
};

// Deterministic function-backed backend; used by tests and fixture tooling.
class CallbackBackend : public TextBackend {
 public:
  using Fn = std::function<std::string(const GenRequest&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
  GenResult generate(const GenRequest& req) override;

 private:
  Fn fn_;
};

// Wraps another backend and captures {fingerprint, response} pairs so a run
// can be replayed later. Duplicate fingerprints must map to equal responses.
class RecordingBackend : public TextBackend {
 public:
  explicit RecordingBackend(std::shared_ptr<TextBackend> inner) : inner_(std::move(inner)) {}
  GenResult generate(const GenRequest& req) override;
  void save_script(const std::string& path) const;
  const std::map<std::string, std::string>& recorded() const { return recorded_; }

 private:
  std::shared_ptr<TextBackend> inner_;
  std::map<std::string, std::string> recorded_;
  std::mutex mutex_;
};

std::shared_ptr<TextBackend> make_backend(const BackendSpec& spec,
                                          std::shared_ptr<AuditLog> audit = nullptr);

}  // namespace webtwin::backend
