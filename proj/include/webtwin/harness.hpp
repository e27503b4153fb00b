#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "webtwin/backend.hpp"
#include "webtwin/improve.hpp"
#include "webtwin/rollout.hpp"
#include "webtwin/simweb.hpp"
#include "webtwin/wmla.hpp"

namespace webtwin::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::filesystem::path config_dir;  // directory of the config file
  std::filesystem::path sites_dir;
  std::filesystem::path tasks_file;
  std::filesystem::path wmla_tasks_file;  // defaults to tasks_file
  std::filesystem::path output_dir;
  int seed = 0;
  int parallelism = 1;

  std::map<std::string, backend::BackendSpec> backends;  // policy|world|judge|scorer

  rollout::RolloutConfig rollout;
  wmla::WmlaConfig wmla;

  improve::JudgeKind collect_judge = improve::JudgeKind::Rule;
  improve::JudgeKind synthesize_judge = improve::JudgeKind::Model;
  bool emit_distill = true;
  int wm_eval_max_depth = 4;
  bool backend_audit = true;
};

// Loads the JSON config document, applies --set overrides (dotted paths) and
// interpolates ${ENV_VAR} in backend auth fields only.
RunConfig load_config(const std::filesystem::path& config_file,
                      const std::vector<std::string>& overrides = {});

// Live backend handles for one run.
struct BackendSet {
  std::shared_ptr<backend::TextBackend> policy;
  std::shared_ptr<backend::TextBackend> world;
  std::shared_ptr<backend::TextBackend> judge;
  std::shared_ptr<backend::TextBackend> scorer;
  std::shared_ptr<backend::AuditLog> audit;
};

// Builds backends from the config; `roles` names the ones the command needs.
BackendSet make_backends(const RunConfig& cfg, const std::vector<std::string>& roles);

struct RunReport {
  std::string command;
  std::map<std::string, long> counts;
  std::map<std::string, double> success_rate;  // by task tag
  long wall_clock_ms = 0;                      // stdout only, never persisted
  int failures = 0;
  nlohmann::json extra;  // per-command payload (e.g. intrinsic buckets)
};

// Persisted form excludes wall-clock so reruns are byte-identical.
nlohmann::json report_to_json(const RunReport& report);
void write_report(const RunConfig& cfg, const RunReport& report);

RunReport cmd_collect(const RunConfig& cfg, const BackendSet& backends);
RunReport cmd_synthesize(const RunConfig& cfg, const BackendSet& backends);
RunReport cmd_emit(const RunConfig& cfg, const BackendSet& backends, const std::string& role);
RunReport cmd_wmla(const RunConfig& cfg, const BackendSet& backends);
RunReport cmd_wm_eval(const RunConfig& cfg, const BackendSet& backends);

// Recomputes report counts from the persisted files and compares them with
// the stored reports. Returns the number of mismatches.
int cmd_report(const RunConfig& cfg, std::string* summary_out = nullptr);

// Exit codes shared by the CLI: 0 ok, 1 task-level failures, 2 config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitTaskFailures = 1;
inline constexpr int kExitConfigError = 2;

// Relative paths used inside the output directory.
std::filesystem::path ledger_path(const RunConfig& cfg, int iteration);
std::optional<int> latest_ledger_iteration(const RunConfig& cfg);
improve::IterationLedger load_ledger(const RunConfig& cfg, int iteration);
void save_ledger(const RunConfig& cfg, const improve::IterationLedger& ledger);

}  // namespace webtwin::harness
