#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "webtwin/agent_context.hpp"
#include "webtwin/backend.hpp"
#include "webtwin/rollout.hpp"
#include "webtwin/simweb.hpp"

namespace webtwin::wmla {

struct WmlaConfig {
  int k = 3;  // candidate actions per step
  int d = 2;  // look-ahead depth
  double greedy_temperature = 0.0;
  double explore_temperature = 0.7;
  enum class ScorerKind { Rule, Model } scorer_kind = ScorerKind::Rule;
};

struct ImaginedStep {
  simweb::Observation observation;
  std::string thought;                     // imagined policy thought, if any
  std::optional<actions::Action> action;   // absent after the deepest observation
};

struct Candidate {
  int index = 0;  // 0 is the greedy sample
  std::string thought;
  actions::Action action;
  std::vector<ImaginedStep> imagined;
  double score = 0.0;  // one of {0, 0.5, 1.0}
  bool score_parsed = true;
  std::string scorer_rationale;
};

// Backend calls made while handling one environment step.
struct CallCounter {
  int policy_samples = 0;
  int policy_imagined = 0;
  int world = 0;
  int scorer = 0;
};

class WmlaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;  // AllMalformed
};

// Candidate 0 at the greedy temperature with no suffix; the rest at the
// explore temperature with a diversity suffix listing earlier samples.
// Wire-equal duplicates are resampled once, then dropped.
std::vector<Candidate> sample_candidates(const agent::PolicyContext& ctx,
                                         backend::TextBackend& policy, const WmlaConfig& cfg,
                                         const rollout::RolloutConfig& rollout_cfg,
                                         CallCounter& calls);

// Imagines up to d steps after the candidate action: alternate next-observation
// generation and policy decisions; stop early on TERMINAL or Stop. The policy
// must act on the generated tree, so observation validation is strict.
void imagine(Candidate& candidate, const simweb::TaskSpec& task,
             const std::vector<agent::Step>& steps, const simweb::Observation& current,
             backend::TextBackend& world, backend::TextBackend& policy, const WmlaConfig& cfg,
             const rollout::RolloutConfig& rollout_cfg, CallCounter& calls);

// Parses the model scorer's reply: the LAST token among {0, 0.5, 1, 1.0}.
// Unparsable replies score 0 with score_parsed = false.
double parse_score_reply(const std::string& reply, bool* parsed);

// Deterministic goal-progress heuristic; lets acceptance runs skip the model.
double rule_score(const simweb::TaskSpec& task, const simweb::SiteSpec& site,
                  const std::string& current_url, const Candidate& candidate);

void score_candidates(std::vector<Candidate>& candidates, const simweb::TaskSpec& task,
                      const simweb::SiteSpec& site, const simweb::Observation& current,
                      backend::TextBackend* scorer, const WmlaConfig& cfg, CallCounter& calls);

// Highest score wins; ties break toward the lowest index (the greedy sample).
const Candidate& select_action(const std::vector<Candidate>& candidates);

struct Backends {
  backend::TextBackend* policy = nullptr;
  backend::TextBackend* world = nullptr;
  backend::TextBackend* scorer = nullptr;  // null for the rule scorer
};

// Per-step audit record sink (JSONL).
class AuditWriter {
 public:
  explicit AuditWriter(const std::filesystem::path& path);
  void append(int step_index, const std::vector<Candidate>& candidates, int selected_index,
              const CallCounter& calls);

 private:
  std::filesystem::path path_;
};

rollout::Trajectory run_with_lookahead(const simweb::TaskSpec& task, const simweb::SiteSpec& site,
                                       const Backends& backends, const WmlaConfig& cfg,
                                       const rollout::RolloutConfig& rollout_cfg,
                                       AuditWriter* audit, const std::string& run_id,
                                       const std::string& trajectory_id, int iteration);

}  // namespace webtwin::wmla
