#include "webtwin/rollout.hpp"

#include <iostream>

#include "webtwin/prompts.hpp"
#include "webtwin/util.hpp"

namespace webtwin::rollout {

using backend::BackendError;
using backend::GenRequest;
using backend::GenResult;
using nlohmann::json;

const char* to_string(Source source) {
  switch (source) {
    case Source::Real: return "real";
    case Source::Synthetic: return "synthetic";
    case Source::Lookahead: return "lookahead";
  }
  return "?";
}

Source source_from_string(const std::string& s) {
  if (s == "real") return Source::Real;
  if (s == "synthetic") return Source::Synthetic;
  if (s == "lookahead") return Source::Lookahead;
  throw PersistError(PersistErrorKind::Io, "unknown trajectory source: " + s);
}

const char* to_string(RolloutErrorKind kind) {
  switch (kind) {
    case RolloutErrorKind::BackendFailure: return "BackendFailure";
    case RolloutErrorKind::MalformedTurn: return "MalformedTurn";
    case RolloutErrorKind::MalformedObservation: return "MalformedObservation";
  }
  return "?";
}

RolloutError::RolloutError(RolloutErrorKind kind, const std::string& message, Trajectory partial)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      partial_(std::move(partial)) {}

PersistError::PersistError(PersistErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

std::vector<actions::Action> Trajectory::action_sequence() const {
  std::vector<actions::Action> out;
  out.reserve(steps.size());
  for (const agent::Step& step : steps) out.push_back(step.action);
  return out;
}

namespace {

// One generation with a single enlarged retry when the completion truncates.
GenResult generate_with_budget(backend::TextBackend& backend, GenRequest req,
                               const Trajectory& partial) {
  try {
    return backend.generate(req);
  } catch (const BackendError& e) {
    if (e.kind() != backend::BackendErrorKind::Truncated) throw;
    req.max_tokens *= 2;
    try {
      return backend.generate(req);
    } catch (const BackendError& inner) {
      throw RolloutError(RolloutErrorKind::BackendFailure, inner.what(), partial);
    }
  }
}

// Samples one policy turn, re-prompting up to cfg.max_malformed_retries times
// when the reply does not parse.
agent::Step sample_policy_turn(backend::TextBackend& policy, const simweb::TaskSpec& task,
                               const std::vector<agent::Step>& steps,
                               const simweb::Observation& current, const RolloutConfig& cfg,
                               const Trajectory& partial) {
  agent::PolicyContext ctx = agent::build_policy_context(task.query, steps, current, cfg.k_obs);
  GenRequest req =
      agent::render_policy_prompt(ctx, cfg.policy_temperature, cfg.policy_max_tokens);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_malformed_retries; ++attempt) {
    GenResult result;
    try {
      result = generate_with_budget(policy, req, partial);
    } catch (const BackendError& e) {
      throw RolloutError(RolloutErrorKind::BackendFailure, e.what(), partial);
    }
    try {
      actions::AgentTurn turn = actions::parse_agent_turn(result.text);
      agent::Step step;
      step.observation = current;
      step.thought = turn.thought;
      step.action = turn.action;
      return step;
    } catch (const std::runtime_error& e) {
      last_error = e.what();
    }
  }
  throw RolloutError(RolloutErrorKind::MalformedTurn,
                     "policy reply unparsable after " +
                         std::to_string(cfg.max_malformed_retries + 1) + " attempts: " + last_error,
                     partial);
}

// Tracks rule 3 of the agent prompt: identical action on an identical
// observation. Warn after 2 repeats, force-terminate after 4.
class RepeatTracker {
 public:
  // Returns true when the episode must be force-terminated.
  bool record(const std::string& action_wire, const std::string& observed, const std::string& id) {
    if (action_wire == last_action_ && observed == last_observation_) {
      ++repeats_;
      if (repeats_ == 2)
        std::cerr << "[" << id << "] warning: action '" << action_wire
                  << "' repeated on an unchanged page\n";
      if (repeats_ >= 4) return true;
    } else {
      repeats_ = 0;
      last_action_ = action_wire;
      last_observation_ = observed;
    }
    return false;
  }

 private:
  std::string last_action_;
  std::string last_observation_;
  int repeats_ = 0;
};

}  // namespace

Trajectory run_real(const simweb::TaskSpec& task, const simweb::SiteSpec& site,
                    backend::TextBackend& policy, const RolloutConfig& cfg,
                    const std::string& run_id, const std::string& trajectory_id, int iteration) {
  Trajectory traj;
  traj.run_id = run_id;
  traj.trajectory_id = trajectory_id;
  traj.iteration = iteration;
  traj.source = Source::Real;
  traj.task = task;

  simweb::EnvSession session(site, task.start_page, cfg.step_limit);
  simweb::Observation current = session.reset().observation;
  RepeatTracker repeats;

  while (true) {
    agent::Step step = sample_policy_turn(policy, task, traj.steps, current, cfg, traj);
    std::string wire = actions::format_action(step.action);
    bool forced = repeats.record(wire, agent::render_observation_wire(current), trajectory_id);

    simweb::StepOutcome outcome = session.step(step.action);
    traj.steps.push_back(std::move(step));

    if (forced) {
      traj.terminated_reason = "env_error";
      break;
    }
    if (outcome.terminated) {
      traj.terminated_reason = simweb::to_string(*outcome.termination_reason);
      break;
    }
    current = outcome.observation;
  }
  return traj;
}

Trajectory run_synthetic(const simweb::TaskSpec& task, const simweb::Observation& seed,
                         backend::TextBackend& policy, backend::TextBackend& world,
                         const RolloutConfig& cfg, const std::string& run_id,
                         const std::string& trajectory_id, int iteration) {
  Trajectory traj;
  traj.run_id = run_id;
  traj.trajectory_id = trajectory_id;
  traj.iteration = iteration;
  traj.source = Source::Synthetic;
  traj.task = task;

  simweb::Observation current = seed;
  RepeatTracker repeats;

  for (int step_index = 1; step_index <= cfg.synthetic_max_steps; ++step_index) {
    agent::Step step = sample_policy_turn(policy, task, traj.steps, current, cfg, traj);
    std::string wire = actions::format_action(step.action);
    bool forced = repeats.record(wire, agent::render_observation_wire(current), trajectory_id);
    bool stopped = std::holds_alternative<actions::Stop>(step.action);
    traj.steps.push_back(step);

    if (forced) {
      traj.terminated_reason = "env_error";
      break;
    }
    if (stopped) {
      traj.terminated_reason = "stopped";
      break;
    }
    if (step_index == cfg.synthetic_max_steps) {
      traj.terminated_reason = "step_limit";
      break;
    }

    agent::WorldContext wctx = agent::build_world_context(
        {traj.steps.begin(), traj.steps.end() - 1}, current, step.action,
        agent::WorldContext::OutputMode::Axtree);
    GenRequest wreq = agent::render_world_prompt(wctx, 0.0, cfg.world_max_tokens);
    GenResult wres;
    try {
      wres = generate_with_budget(world, wreq, traj);
    } catch (const BackendError& e) {
      throw RolloutError(RolloutErrorKind::BackendFailure, e.what(), traj);
    }

    agent::WorldPrediction pred = agent::parse_world_output(wres.text);
    traj.steps.back().wm_thought = pred.rationale;
    if (pred.terminal) {
      traj.terminated_reason = "world_terminal";
      break;
    }
    if (cfg.strict_world_observations && !pred.observation_valid)
      throw RolloutError(RolloutErrorKind::MalformedObservation,
                         "generated observation failed validation at step " +
                             std::to_string(step_index),
                         traj);
    current = pred.observation;
  }
  return traj;
}

namespace {

// Extracts the ordered action history from a rendered world request: one
// "ACTION: <wire>" user message per past action, plus the scheduled action on
// the final line of the last user message.
std::vector<actions::Action> actions_from_world_request(const GenRequest& req) {
  std::vector<actions::Action> out;
  for (const backend::Message& m : req.messages) {
    if (m.role != "user") continue;
    if (util::starts_with(m.content, "ACTION: ")) {
      out.push_back(actions::parse_action(std::string_view(m.content).substr(8)));
      continue;
    }
    size_t pos = m.content.rfind("\n\nACTION: ");
    if (pos != std::string::npos)
      out.push_back(actions::parse_action(std::string_view(m.content).substr(pos + 10)));
  }
  return out;
}

class OracleWorldBackend : public backend::TextBackend {
 public:
  OracleWorldBackend(simweb::SiteSpec site, std::string start_page)
      : site_(std::move(site)), start_page_(std::move(start_page)) {}

  GenResult generate(const GenRequest& req) override {
    std::vector<actions::Action> history = actions_from_world_request(req);
    if (history.empty())
      throw BackendError(backend::BackendErrorKind::Protocol,
                         "oracle world: no ACTION lines in request");

    simweb::EnvSession session(site_, start_page_, static_cast<int>(history.size()) + 1);
    simweb::StepOutcome outcome = session.reset();
    for (const actions::Action& a : history) {
      if (session.terminated()) break;
      outcome = session.step(a);
    }

    GenResult result;
    if (std::holds_alternative<actions::Stop>(history.back())) {
      result.text = std::string(kOracleRationale) + "\n" + prompts::kObservationMarker + "\n" +
                    prompts::kTerminalMarker;
      return result;
    }
    result.text = std::string(kOracleRationale) + "\n" + prompts::kObservationMarker + "\n" +
                  agent::render_observation_wire(outcome.observation);
    return result;
  }

 private:
  simweb::SiteSpec site_;  // owned copy; the backend may outlive the caller's spec
  std::string start_page_;
};

}  // namespace

std::shared_ptr<backend::TextBackend> oracle_world(const simweb::SiteSpec& site,
                                                   const std::string& start_page) {
  return std::make_shared<OracleWorldBackend>(site, start_page);
}

// ---------------------------------------------------------------------------
// Persistence.

json trajectory_to_json(const Trajectory& t) {
  json steps = json::array();
  for (const agent::Step& step : t.steps) {
    json s = {
        {"url", step.observation.url},
        {"axtree", step.observation.axtree},
        {"thought", step.thought},
        {"action_wire", actions::format_action(step.action)},
    };
    if (step.observation.error_feedback) s["error_feedback"] = *step.observation.error_feedback;
    if (step.wm_thought) s["wm_thought"] = *step.wm_thought;
    steps.push_back(std::move(s));
  }

  json goal;
  switch (t.task.goal.kind) {
    case simweb::GoalSpec::Kind::ReachPage:
      goal = {{"kind", "reach_page"}, {"page", t.task.goal.page}};
      break;
    case simweb::GoalSpec::Kind::StopAnswerMatches:
      goal = {{"kind", "stop_answer_matches"}, {"pattern", t.task.goal.pattern}};
      break;
    case simweb::GoalSpec::Kind::VisitedAll:
      goal = {{"kind", "visited_all"}, {"pages", t.task.goal.pages}};
      break;
  }

  json out = {
      {"schema_version", t.schema_version},
      {"run_id", t.run_id},
      {"trajectory_id", t.trajectory_id},
      {"iteration", t.iteration},
      {"source", to_string(t.source)},
      {"task",
       {{"id", t.task.id},
        {"site", t.task.site},
        {"query", t.task.query},
        {"start_page", t.task.start_page},
        {"tag", t.task.tag},
        {"goal", goal}}},
      {"steps", steps},
      {"terminated_reason", t.terminated_reason},
  };
  if (t.judge_verdict)
    out["judge_verdict"] = {{"accepted", t.judge_verdict->accepted},
                            {"score", t.judge_verdict->score},
                            {"detail", t.judge_verdict->detail}};
  return out;
}

Trajectory trajectory_from_json(const json& j) {
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    throw PersistError(PersistErrorKind::Io, "trajectory record missing schema_version");
  int version = j["schema_version"].get<int>();
  if (version != kTrajectorySchemaVersion)
    throw PersistError(PersistErrorKind::SchemaVersionMismatch,
                       "trajectory schema_version " + std::to_string(version) +
                           " not supported (expected " +
                           std::to_string(kTrajectorySchemaVersion) + ")");

  Trajectory t;
  t.schema_version = version;
  t.run_id = j.value("run_id", "");
  t.trajectory_id = j.value("trajectory_id", "");
  t.iteration = j.value("iteration", 0);
  t.source = source_from_string(j.value("source", "real"));
  t.terminated_reason = j.value("terminated_reason", "");

  const json& task = j.at("task");
  t.task.id = task.value("id", "");
  t.task.site = task.value("site", "");
  t.task.query = task.value("query", "");
  t.task.start_page = task.value("start_page", "");
  t.task.tag = task.value("tag", t.task.site);
  const json& goal = task.at("goal");
  std::string kind = goal.value("kind", "");
  if (kind == "reach_page") {
    t.task.goal.kind = simweb::GoalSpec::Kind::ReachPage;
    t.task.goal.page = goal.value("page", "");
  } else if (kind == "stop_answer_matches") {
    t.task.goal.kind = simweb::GoalSpec::Kind::StopAnswerMatches;
    t.task.goal.pattern = goal.value("pattern", "");
  } else if (kind == "visited_all") {
    t.task.goal.kind = simweb::GoalSpec::Kind::VisitedAll;
    for (const auto& p : goal.value("pages", json::array()))
      t.task.goal.pages.push_back(p.get<std::string>());
  } else {
    throw PersistError(PersistErrorKind::Io, "unknown goal kind in trajectory: " + kind);
  }

  for (const json& s : j.value("steps", json::array())) {
    agent::Step step;
    step.observation.url = s.value("url", "");
    step.observation.axtree = s.value("axtree", "");
    if (s.contains("error_feedback"))
      step.observation.error_feedback = s["error_feedback"].get<std::string>();
    step.thought = s.value("thought", "");
    step.action = actions::parse_action(s.value("action_wire", ""));
    if (s.contains("wm_thought")) step.wm_thought = s["wm_thought"].get<std::string>();
    t.steps.push_back(std::move(step));
  }

  if (j.contains("judge_verdict")) {
    JudgeVerdict v;
    v.accepted = j["judge_verdict"].value("accepted", false);
    v.score = j["judge_verdict"].value("score", 0.0);
    v.detail = j["judge_verdict"].value("detail", "");
    t.judge_verdict = v;
  }
  return t;
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path) : path_(path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw PersistError(PersistErrorKind::Io, "cannot open " + path_.string());
}

void TrajectoryWriter::append(const Trajectory& t) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw PersistError(PersistErrorKind::Io, "cannot append to " + path_.string());
  out << trajectory_to_json(t).dump() << '\n';
  if (!out) throw PersistError(PersistErrorKind::Io, "short write to " + path_.string());
}

TrajectoryReader::TrajectoryReader(const std::filesystem::path& path) : in_(path), path_(path) {
  if (!in_) throw PersistError(PersistErrorKind::Io, "cannot open " + path.string());
}

std::optional<Trajectory> TrajectoryReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (util::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw PersistError(PersistErrorKind::Io,
                         "bad JSON at " + path_.string() + ":" + std::to_string(line_no_));
    return trajectory_from_json(j);
  }
  return std::nullopt;
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
  TrajectoryReader reader(path);
  std::vector<Trajectory> out;
  while (auto t = reader.next()) out.push_back(std::move(*t));
  return out;
}

}  // namespace webtwin::rollout
