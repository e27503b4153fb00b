#pragma once

#include <optional>
#include <string>
#include <vector>

#include "webtwin/actions.hpp"
#include "webtwin/backend.hpp"
#include "webtwin/simweb.hpp"

namespace webtwin::agent {

// One trajectory step: the observation the policy saw, what it thought, what
// it did. `wm_thought` is the transition rationale attached to this step's
// action on world-model-converted trajectories.
struct Step {
  simweb::Observation observation;
  std::string thought;
  actions::Action action;
  std::optional<std::string> wm_thought;
};

// Clipped policy context: every past (thought, action) pair survives, but at
// most k observations (the current one always counts against k).
struct PolicyContext {
  std::string query;
  struct PastStep {
    std::optional<simweb::Observation> observation;  // absent when clipped
    std::string thought;
    std::string action_wire;
  };
  std::vector<PastStep> past;
  simweb::Observation current;
  int k = 3;
};

PolicyContext build_policy_context(const std::string& query, const std::vector<Step>& steps,
                                   const simweb::Observation& current, int k);

// Next-observation context: all prior (action, rationale) pairs, the latest
// observation only, and the scheduled action last.
struct WorldContext {
  enum class OutputMode { Abstract, Axtree };
  struct PastAction {
    std::string action_wire;
    std::optional<std::string> rationale;
  };
  std::vector<PastAction> past;
  simweb::Observation last_observation;
  std::string scheduled_wire;
  OutputMode mode = OutputMode::Axtree;
};

WorldContext build_world_context(const std::vector<Step>& completed, const simweb::Observation& current,
                                 const actions::Action& scheduled, WorldContext::OutputMode mode);

// Observation wire form: "URL: <url>" + newline + tree text, plus a trailing
// NOTE block when the environment fed an execution error back.
std::string render_observation_wire(const simweb::Observation& obs);
simweb::Observation parse_observation_wire(std::string_view wire);

// Deterministic prompt assembly. Same context, same request bytes.
backend::GenRequest render_policy_prompt(const PolicyContext& ctx, double temperature,
                                         int max_tokens, const std::string& extra_instruction = "");
backend::GenRequest render_world_prompt(const WorldContext& ctx, double temperature, int max_tokens);

std::string render_turn(const std::string& thought, const std::string& action_wire);

// "Please generate actions different from <a1>, <a2>, ..." (non-empty input).
std::string diversity_suffix(const std::vector<actions::Action>& prior_actions);

// Counts "OBSERVATION:" blocks in a rendered request (test/diagnostic hook).
int count_observation_blocks(const backend::GenRequest& req);

// Parsed reply of the next-observation generator.
struct WorldPrediction {
  std::string rationale;
  bool terminal = false;
  bool has_marker = false;
  std::string raw_observation;  // text after the marker, verbatim
  simweb::Observation observation;
  bool observation_valid = false;  // URL line present and tree passes validation
};

WorldPrediction parse_world_output(std::string_view text);

}  // namespace webtwin::agent
