#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "webtwin/backend.hpp"
#include "webtwin/rollout.hpp"
#include "webtwin/simweb.hpp"

namespace webtwin::improve {

enum class JudgeKind { Rule, Model };

struct JudgeSpec {
  JudgeKind kind = JudgeKind::Rule;
  std::shared_ptr<backend::TextBackend> backend;  // required for Model
};

class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;  // UnparsableVerdict
};

// Rule judging replays the recorded actions through the site and applies the
// task's goal predicate. Model judging renders the evaluator prompt with the
// final observation and final response; the LAST occurrence of SUCCESS /
// NOT SUCCESS in the reply wins.
rollout::JudgeVerdict judge_trajectory(const rollout::Trajectory& trajectory,
                                       const JudgeSpec& judge,
                                       const std::map<std::string, simweb::SiteSpec>& sites);

struct Provenance {
  int iteration_collected = 0;
  rollout::Source source = rollout::Source::Real;
  std::string task_id;
};

// Cumulative accepted-trajectory set; grows monotonically across iterations.
struct IterationLedger {
  int iteration = 0;
  std::vector<std::string> query_pool;  // task ids
  std::vector<std::string> accepted;    // trajectory ids, append order
  std::map<std::string, Provenance> provenance;
  std::map<std::string, std::string> dedup;  // content hash -> trajectory id
  std::vector<std::string> trajectory_files;  // relative to the run directory
  std::vector<std::string> dataset_files;
};

class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;  // DuplicateTrajectory etc.
};

// Hash for duplicate detection: task id plus the action wire sequence.
std::string trajectory_content_hash(const rollout::Trajectory& t);

// D_{i+1} = D_i plus the freshly accepted trajectories. A re-appearing
// trajectory id is an error; an identical re-success (same content hash) is
// silently dropped.
IterationLedger advance_iteration(const IterationLedger& ledger,
                                  const std::vector<rollout::Trajectory>& new_accepted,
                                  int* dropped_duplicates = nullptr);

nlohmann::json ledger_to_json(const IterationLedger& ledger);
IterationLedger ledger_from_json(const nlohmann::json& j);

// Queries that no accepted REAL trajectory has solved yet.
std::vector<simweb::TaskSpec> select_synthesis_queries(const IterationLedger& ledger,
                                                       const std::vector<simweb::TaskSpec>& pool);

struct SftRecord {
  std::string role;  // "policy" | "world"
  std::string system;
  std::vector<backend::Message> messages;
  std::string target;
  std::string trajectory_id;
  int step_index = 0;
};

nlohmann::json sft_record_to_json(const SftRecord& r);

// One record per step; the target bundles thought and action so a single
// completion trains both terms of the step objective.
std::vector<SftRecord> emit_policy_sft(const std::vector<rollout::Trajectory>& trajectories,
                                       int k_obs);

struct WorldSftOptions {
  // Distills missing transition rationales through this backend (the base
  // policy model); when null, missing rationales follow `strict`.
  backend::TextBackend* distiller = nullptr;
  bool strict = false;  // true: missing rationale is an error
};

class MissingRationale : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One record per transition: an N-step trajectory yields N-1 records.
std::vector<SftRecord> emit_world_sft(const std::vector<rollout::Trajectory>& trajectories,
                                      const WorldSftOptions& options = {});

// ---------------------------------------------------------------------------
// Intrinsic evaluation of generated observations.

struct IntrinsicSample {
  std::string predicted_tree;
  std::string ground_truth_tree;
  int depth = 1;
};

struct IntrinsicScores {
  double str = 0.0;  // gated to 0 when the predicted tree fails validation
  double sim = 0.0;
  double oa = 0.0;
  int depth = 1;
  bool structurally_valid = false;
};

struct IntrinsicAggregate {
  double str = 0.0;
  double sim = 0.0;
  double oa = 0.0;
  int count = 0;
};

struct IntrinsicReport {
  std::vector<IntrinsicScores> per_sample;
  std::map<std::string, IntrinsicAggregate> buckets;  // "1", "2", "3", "4plus"
  IntrinsicAggregate overall;
};

class UnparsableScores : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bucket key for a generation depth, mirroring the {1, 2, 3, >=4} layout.
std::string depth_bucket(int depth);

IntrinsicReport intrinsic_eval(const std::vector<IntrinsicSample>& samples,
                               backend::TextBackend& judge);

nlohmann::json intrinsic_report_to_json(const IntrinsicReport& report);

}  // namespace webtwin::improve
