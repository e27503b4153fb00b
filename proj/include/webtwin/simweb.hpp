#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "webtwin/actions.hpp"

namespace webtwin::simweb {

// Matches a Click or Type action against an edge. For Type edges an optional
// content regex filters what was typed (search semantics).
struct ActionMatcher {
  std::string verb;  // "click" | "type"
  int target_id = 0;
  std::optional<std::string> content_pattern;
};

struct Edge {
  std::string from;
  ActionMatcher match;
  std::string to;
};

struct Page {
  std::string id;
  std::string url;
  std::string axtree_file;
  std::string axtree_text;  // loaded at site load time; env never mutates it
};

struct SiteSpec {
  std::string id;
  std::vector<Page> pages;  // manifest order
  std::vector<Edge> edges;  // manifest order; first match wins
  std::string start_page;
  std::string homepage;
  int window_lines = 40;  // line budget before scroll windowing kicks in

  const Page* page(const std::string& page_id) const;
};

class SiteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loads `site.toml` plus the page axtree files from one site directory.
SiteSpec load_site(const std::filesystem::path& dir);

// Loads every subdirectory containing a site.toml, keyed by directory name.
std::map<std::string, SiteSpec> load_sites(const std::filesystem::path& dir);

struct ValidationEntry {
  enum class Level { Error, Warning };
  Level level;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;
  bool ok() const;  // no Error entries
};

ValidationReport validate_spec(const SiteSpec& spec);

struct GoalSpec {
  enum class Kind { ReachPage, StopAnswerMatches, VisitedAll };
  Kind kind = Kind::ReachPage;
  std::string page;                 // ReachPage
  std::string pattern;              // StopAnswerMatches, case-sensitive regex
  std::vector<std::string> pages;   // VisitedAll
};

struct TaskSpec {
  std::string id;
  std::string site;
  std::string query;
  std::string start_page;
  GoalSpec goal;
  std::string tag;  // reporting bucket; defaults to the site id
};

std::vector<TaskSpec> load_tasks(const std::filesystem::path& jsonl_file);

struct Observation {
  std::string url;
  std::string axtree;
  std::optional<std::string> error_feedback;  // delivered alongside o_{t+1}
};

enum class TerminationReason { Stopped, StepLimit, EnvError };

const char* to_string(TerminationReason reason);

struct StepOutcome {
  Observation observation;
  bool terminated = false;
  std::optional<TerminationReason> termination_reason;
};

enum class EnvErrorKind { UnknownPage, SessionTerminated };

class EnvError : public std::runtime_error {
 public:
  EnvError(EnvErrorKind kind, const std::string& message);
  EnvErrorKind kind() const { return kind_; }

 private:
  EnvErrorKind kind_;
};

// Windowed view of a page's axtree: at most `budget` node lines starting at
// `offset`, with the ancestor chain prepended so the view stays a valid tree.
std::string render_view(const std::string& full_text, int offset, int budget);
int node_line_count(const std::string& full_text);

// Single-owner, single-threaded session over a shared read-only SiteSpec.
class EnvSession {
 public:
  EnvSession(const SiteSpec& spec, const std::string& start_page, int step_limit);

  StepOutcome reset();
  StepOutcome step(const actions::Action& action);

  bool terminated() const { return terminated_; }
  int step_count() const { return step_count_; }
  const std::string& current_page() const { return current_; }
  const std::optional<std::string>& stop_answer() const { return stop_answer_; }
  const std::vector<std::string>& visited() const { return visited_; }

 private:
  Observation observe(std::optional<std::string> feedback) const;
  void goto_page(const std::string& page_id);

  const SiteSpec& spec_;
  std::string current_;
  std::vector<std::pair<std::string, int>> history_;  // (page, scroll offset)
  int scroll_offset_ = 0;
  int step_count_ = 0;
  int step_limit_ = 15;
  bool terminated_ = false;
  std::optional<TerminationReason> reason_;
  std::optional<std::string> stop_answer_;
  std::vector<std::string> visited_;
};

// What a finished episode left behind, for rule-based goal checks.
struct GoalEvidence {
  std::string final_page;
  std::optional<std::string> stop_answer;
  std::vector<std::string> visited;
};

bool check_goal(const TaskSpec& task, const GoalEvidence& evidence);

// Replays an action sequence through a fresh session and reports the evidence.
GoalEvidence replay_actions(const SiteSpec& spec, const std::string& start_page,
                            const std::vector<actions::Action>& actions);

}  // namespace webtwin::simweb
