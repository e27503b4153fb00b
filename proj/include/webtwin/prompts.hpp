#pragma once

namespace webtwin::prompts {

// System prompt for policy action generation.
extern const char* const kAgentSystem;

// System prompts for the next-observation generator, one per output mode.
extern const char* const kWorldAbstract;
extern const char* const kWorldAxtree;

// System prompt for end-to-end trajectory evaluation (SUCCESS / NOT SUCCESS).
extern const char* const kTrajectoryEval;

// System prompt for scoring a generated tree against a ground-truth tree.
extern const char* const kIntrinsicEval;

// Addendum appended to kWorldAxtree at render time; defines the completion
// shape (rationale, marker, tree) and the terminal-state channel.
extern const char* const kWorldOutputProtocol;

// Scorer prompt for look-ahead candidate rating ({0, 0.5, 1.0}).
extern const char* const kLookaheadScorer;

// Prompt used to distill one-sentence transition rationales from the base
// model when converting real trajectories into next-observation training data.
extern const char* const kTransitionRationale;

// Separates the transition rationale from the predicted observation.
inline constexpr const char* kObservationMarker = "---OBSERVATION---";

// Emitted by the next-observation generator in place of a tree when the
// scheduled action ends the browsing session.
inline constexpr const char* kTerminalMarker = "TERMINAL";

}  // namespace webtwin::prompts
