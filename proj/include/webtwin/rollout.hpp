#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "webtwin/agent_context.hpp"
#include "webtwin/backend.hpp"
#include "webtwin/simweb.hpp"

namespace webtwin::rollout {

enum class Source { Real, Synthetic, Lookahead };

const char* to_string(Source source);
Source source_from_string(const std::string& s);

struct JudgeVerdict {
  bool accepted = false;
  double score = 0.0;  // 0 or 1
  std::string detail;
};

inline constexpr int kTrajectorySchemaVersion = 1;

struct Trajectory {
  int schema_version = kTrajectorySchemaVersion;
  std::string run_id;
  std::string trajectory_id;
  int iteration = 0;
  Source source = Source::Real;
  simweb::TaskSpec task;
  std::vector<agent::Step> steps;
  std::string terminated_reason;  // stopped | step_limit | env_error | world_terminal
  std::optional<JudgeVerdict> judge_verdict;

  std::vector<actions::Action> action_sequence() const;
};

struct RolloutConfig {
  int k_obs = 3;
  int step_limit = 15;
  int synthetic_max_steps = 7;
  double policy_temperature = 0.0;
  int max_malformed_retries = 2;
  int policy_max_tokens = 1024;
  int world_max_tokens = 4096;
  bool strict_world_observations = false;  // synthesis tolerates invalid trees
};

enum class RolloutErrorKind { BackendFailure, MalformedTurn, MalformedObservation };

const char* to_string(RolloutErrorKind kind);

// Carries the partial trajectory so callers can persist what was collected.
class RolloutError : public std::runtime_error {
 public:
  RolloutError(RolloutErrorKind kind, const std::string& message, Trajectory partial);
  RolloutErrorKind kind() const { return kind_; }
  const Trajectory& partial() const { return partial_; }

 private:
  RolloutErrorKind kind_;
  Trajectory partial_;
};

// Policy-driven episode against the simulated web (the real transition).
Trajectory run_real(const simweb::TaskSpec& task, const simweb::SiteSpec& site,
                    backend::TextBackend& policy, const RolloutConfig& cfg,
                    const std::string& run_id, const std::string& trajectory_id, int iteration);

// Episode where a generative backend replaces the transition function.
Trajectory run_synthetic(const simweb::TaskSpec& task, const simweb::Observation& seed,
                         backend::TextBackend& policy, backend::TextBackend& world,
                         const RolloutConfig& cfg, const std::string& run_id,
                         const std::string& trajectory_id, int iteration);

// The true transition wrapped behind the generation interface: replays the
// full action history found in the request from `start_page` and renders the
// resulting observation. Ground truth for synthetic==real equivalence checks.
std::shared_ptr<backend::TextBackend> oracle_world(const simweb::SiteSpec& site,
                                                   const std::string& start_page);

// Rationale string the oracle attaches to its predictions.
inline constexpr const char* kOracleRationale = "Transition replayed from the site graph.";

enum class PersistErrorKind { Io, SchemaVersionMismatch };

class PersistError : public std::runtime_error {
 public:
  PersistError(PersistErrorKind kind, const std::string& message);
  PersistErrorKind kind() const { return kind_; }

 private:
  PersistErrorKind kind_;
};

nlohmann::json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

// Serialized appender; one writer per output file.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const std::filesystem::path& path);
  void append(const Trajectory& t);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

// Streaming reader; does not hold the whole file in memory.
class TrajectoryReader {
 public:
  explicit TrajectoryReader(const std::filesystem::path& path);
  std::optional<Trajectory> next();

 private:
  std::ifstream in_;
  std::filesystem::path path_;
  int line_no_ = 0;
};

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

}  // namespace webtwin::rollout
