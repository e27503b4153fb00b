#include "webtwin/wmla.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include "json.hpp"
#include "webtwin/prompts.hpp"
#include "webtwin/util.hpp"

namespace webtwin::wmla {

using backend::GenRequest;
using nlohmann::json;

namespace {

struct SampledTurn {
  std::string thought;
  actions::Action action;
};

std::optional<SampledTurn> try_sample(backend::TextBackend& policy,
                                      const agent::PolicyContext& ctx, double temperature,
                                      int max_tokens, const std::string& suffix,
                                      CallCounter& calls) {
  GenRequest req = agent::render_policy_prompt(ctx, temperature, max_tokens, suffix);
  ++calls.policy_samples;
  std::string reply = policy.generate(req).text;
  try {
    actions::AgentTurn turn = actions::parse_agent_turn(reply);
    return SampledTurn{turn.thought, turn.action};
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<Candidate> sample_candidates(const agent::PolicyContext& ctx,
                                         backend::TextBackend& policy, const WmlaConfig& cfg,
                                         const rollout::RolloutConfig& rollout_cfg,
                                         CallCounter& calls) {
  std::vector<Candidate> out;
  std::vector<actions::Action> sampled;  // everything sampled so far this step

  for (int i = 0; i < cfg.k; ++i) {
    double temperature = i == 0 ? cfg.greedy_temperature : cfg.explore_temperature;
    std::string suffix = i == 0 ? "" : agent::diversity_suffix(sampled);

    std::optional<SampledTurn> turn =
        try_sample(policy, ctx, temperature, rollout_cfg.policy_max_tokens, suffix, calls);
    if (!turn) continue;

    auto duplicate = [&](const actions::Action& a) {
      return std::any_of(out.begin(), out.end(), [&](const Candidate& c) {
        return actions::wire_equal(c.action, a);
      });
    };

    sampled.push_back(turn->action);
    if (i > 0 && duplicate(turn->action)) {
      // One resample with the duplicate listed in the suffix, then drop.
      std::optional<SampledTurn> retry = try_sample(
          policy, ctx, temperature, rollout_cfg.policy_max_tokens,
          agent::diversity_suffix(sampled), calls);
      if (!retry || duplicate(retry->action)) continue;
      turn = retry;
      sampled.push_back(turn->action);
    }

    Candidate candidate;
    candidate.index = static_cast<int>(out.size());
    candidate.thought = turn->thought;
    candidate.action = turn->action;
    out.push_back(std::move(candidate));
  }

  if (out.empty()) throw WmlaError("AllMalformed: no candidate action could be parsed");
  return out;
}

void imagine(Candidate& candidate, const simweb::TaskSpec& task,
             const std::vector<agent::Step>& steps, const simweb::Observation& current,
             backend::TextBackend& world, backend::TextBackend& policy, const WmlaConfig& cfg,
             const rollout::RolloutConfig& rollout_cfg, CallCounter& calls) {
  candidate.imagined.clear();
  if (std::holds_alternative<actions::Stop>(candidate.action)) return;

  // Rolling step list: the real history, then the candidate, then what gets
  // imagined along the way.
  std::vector<agent::Step> rolled = steps;
  agent::Step first;
  first.observation = current;
  first.thought = candidate.thought;
  first.action = candidate.action;
  rolled.push_back(std::move(first));

  for (int j = 1; j <= cfg.d; ++j) {
    const agent::Step& acting = rolled.back();
    std::vector<agent::Step> completed(rolled.begin(), rolled.end() - 1);
    agent::WorldContext wctx = agent::build_world_context(
        completed, acting.observation, acting.action, agent::WorldContext::OutputMode::Axtree);
    GenRequest wreq = agent::render_world_prompt(wctx, 0.0, rollout_cfg.world_max_tokens);
    ++calls.world;
    agent::WorldPrediction pred = agent::parse_world_output(world.generate(wreq).text);
    rolled.back().wm_thought = pred.rationale;
    if (pred.terminal) break;
    if (!pred.observation_valid)
      throw rollout::RolloutError(rollout::RolloutErrorKind::MalformedObservation,
                                  "imagined observation failed validation (candidate " +
                                      std::to_string(candidate.index) + ", depth " +
                                      std::to_string(j) + ")",
                                  {});

    ImaginedStep imagined;
    imagined.observation = pred.observation;
    candidate.imagined.push_back(imagined);

    // The deepest observation needs no follow-up action for scoring.
    if (j == cfg.d) break;

    agent::PolicyContext pctx =
        agent::build_policy_context(task.query, rolled, pred.observation, rollout_cfg.k_obs);
    GenRequest preq =
        agent::render_policy_prompt(pctx, 0.0, rollout_cfg.policy_max_tokens);
    ++calls.policy_imagined;
    std::string reply = policy.generate(preq).text;
    actions::AgentTurn turn;
    try {
      turn = actions::parse_agent_turn(reply);
    } catch (const std::runtime_error& e) {
      throw rollout::RolloutError(rollout::RolloutErrorKind::MalformedTurn,
                                  std::string("imagined policy turn unparsable: ") + e.what(), {});
    }
    candidate.imagined.back().thought = turn.thought;
    candidate.imagined.back().action = turn.action;

    agent::Step next;
    next.observation = pred.observation;
    next.thought = turn.thought;
    next.action = turn.action;
    rolled.push_back(std::move(next));

    if (std::holds_alternative<actions::Stop>(turn.action)) break;
  }
}

double parse_score_reply(const std::string& reply, bool* parsed) {
  // Scan tokens from the end; accept 0, 0.5, 1 and 1.0 (with punctuation).
  std::vector<std::string> tokens;
  std::string token;
  for (char c : reply) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      if (!token.empty()) tokens.push_back(token);
      token.clear();
    } else {
      token += c;
    }
  }
  if (!token.empty()) tokens.push_back(token);

  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    std::string t = *it;
    while (!t.empty() && (t.back() == '.' || t.back() == ',' || t.back() == ')' || t.back() == ']'))
      t.pop_back();
    while (!t.empty() && (t.front() == '(' || t.front() == '[')) t.erase(t.begin());
    if (t == "0" || t == "0.0") {
      if (parsed) *parsed = true;
      return 0.0;
    }
    if (t == "0.5") {
      if (parsed) *parsed = true;
      return 0.5;
    }
    if (t == "1" || t == "1.0") {
      if (parsed) *parsed = true;
      return 1.0;
    }
  }
  if (parsed) *parsed = false;
  return 0.0;
}

double rule_score(const simweb::TaskSpec& task, const simweb::SiteSpec& site,
                  const std::string& current_url, const Candidate& candidate) {
  using simweb::GoalSpec;

  auto stop_answer_of = [](const std::optional<actions::Action>& a) -> const std::string* {
    if (!a) return nullptr;
    if (const auto* stop = std::get_if<actions::Stop>(&*a)) return &stop->answer;
    return nullptr;
  };

  bool moved = false;
  for (const ImaginedStep& step : candidate.imagined)
    if (step.observation.url != current_url) moved = true;

  switch (task.goal.kind) {
    case GoalSpec::Kind::ReachPage: {
      const simweb::Page* goal_page = site.page(task.goal.page);
      if (!goal_page) return 0.0;
      // Stopping while already on the goal page completes the task.
      if (std::holds_alternative<actions::Stop>(candidate.action) &&
          current_url == goal_page->url)
        return 1.0;
      for (const ImaginedStep& step : candidate.imagined)
        if (step.observation.url == goal_page->url) return 1.0;
      break;
    }
    case GoalSpec::Kind::StopAnswerMatches: {
      std::regex re(task.goal.pattern);
      if (const std::string* answer = stop_answer_of(candidate.action))
        if (std::regex_search(*answer, re)) return 1.0;
      for (const ImaginedStep& step : candidate.imagined)
        if (const std::string* answer = stop_answer_of(step.action))
          if (std::regex_search(*answer, re)) return 1.0;
      break;
    }
    case GoalSpec::Kind::VisitedAll: {
      size_t seen = 0;
      for (const std::string& page_id : task.goal.pages) {
        const simweb::Page* page = site.page(page_id);
        if (!page) continue;
        bool hit = page->url == current_url;
        for (const ImaginedStep& step : candidate.imagined)
          if (step.observation.url == page->url) hit = true;
        if (hit) ++seen;
      }
      if (seen == task.goal.pages.size()) return 1.0;
      break;
    }
  }
  return moved ? 0.5 : 0.0;
}

void score_candidates(std::vector<Candidate>& candidates, const simweb::TaskSpec& task,
                      const simweb::SiteSpec& site, const simweb::Observation& current,
                      backend::TextBackend* scorer, const WmlaConfig& cfg, CallCounter& calls) {
  for (Candidate& candidate : candidates) {
    if (cfg.scorer_kind == WmlaConfig::ScorerKind::Rule || scorer == nullptr) {
      candidate.score = rule_score(task, site, current.url, candidate);
      candidate.score_parsed = true;
      candidate.scorer_rationale = "rule scorer";
      continue;
    }

    std::string rollout_text;
    if (candidate.imagined.empty()) {
      rollout_text = "(the action ends the session immediately)";
    } else {
      for (size_t i = 0; i < candidate.imagined.size(); ++i) {
        const ImaginedStep& step = candidate.imagined[i];
        rollout_text += "Step +" + std::to_string(i + 1) + ":\n" +
                        agent::render_observation_wire(step.observation) + "\n";
        if (step.action)
          rollout_text += "Next action: " + actions::format_action(*step.action) + "\n";
      }
    }

    GenRequest req;
    req.system = prompts::kLookaheadScorer;
    req.temperature = 0.0;
    req.max_tokens = 512;
    req.tag = "scorer";
    req.messages.push_back(
        {"user", "OBJECTIVE: " + task.query + "\n\nCURRENT OBSERVATION:\n" +
                     agent::render_observation_wire(current) +
                     "\n\nCANDIDATE ACTION: " + actions::format_action(candidate.action) +
                     "\n\nSIMULATED ROLLOUT:\n" + rollout_text});
    ++calls.scorer;
    std::string reply = scorer->generate(req).text;
    bool parsed = false;
    candidate.score = parse_score_reply(reply, &parsed);
    candidate.score_parsed = parsed;
    candidate.scorer_rationale = reply;
  }
}

const Candidate& select_action(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw WmlaError("select_action on an empty candidate set");
  const Candidate* best = &candidates.front();
  for (const Candidate& c : candidates)
    if (c.score > best->score) best = &c;  // strict: ties keep the lower index
  return *best;
}

AuditWriter::AuditWriter(const std::filesystem::path& path) : path_(path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path_, std::ios::trunc);
}

void AuditWriter::append(int step_index, const std::vector<Candidate>& candidates,
                         int selected_index, const CallCounter& calls) {
  json cands = json::array();
  for (const Candidate& c : candidates)
    cands.push_back({{"index", c.index},
                     {"action_wire", actions::format_action(c.action)},
                     {"imagined_len", c.imagined.size()},
                     {"score", c.score},
                     {"score_parsed", c.score_parsed},
                     {"rationale", c.scorer_rationale}});
  json entry = {
      {"step_index", step_index},
      {"candidates", cands},
      {"selected_index", selected_index},
      {"backend_calls",
       {{"policy_samples", calls.policy_samples},
        {"policy_imagined", calls.policy_imagined},
        {"world", calls.world},
        {"scorer", calls.scorer}}},
  };
  std::ofstream out(path_, std::ios::app);
  out << entry.dump() << '\n';
}

rollout::Trajectory run_with_lookahead(const simweb::TaskSpec& task, const simweb::SiteSpec& site,
                                       const Backends& backends, const WmlaConfig& cfg,
                                       const rollout::RolloutConfig& rollout_cfg,
                                       AuditWriter* audit, const std::string& run_id,
                                       const std::string& trajectory_id, int iteration) {
  rollout::Trajectory traj;
  traj.run_id = run_id;
  traj.trajectory_id = trajectory_id;
  traj.iteration = iteration;
  traj.source = rollout::Source::Lookahead;
  traj.task = task;

  simweb::EnvSession session(site, task.start_page, rollout_cfg.step_limit);
  simweb::Observation current = session.reset().observation;

  int step_index = 0;
  while (true) {
    ++step_index;
    CallCounter calls;
    agent::PolicyContext ctx =
        agent::build_policy_context(task.query, traj.steps, current, rollout_cfg.k_obs);

    std::vector<Candidate> candidates =
        sample_candidates(ctx, *backends.policy, cfg, rollout_cfg, calls);
    for (Candidate& candidate : candidates)
      imagine(candidate, task, traj.steps, current, *backends.world, *backends.policy, cfg,
              rollout_cfg, calls);
    score_candidates(candidates, task, site, current, backends.scorer, cfg, calls);
    const Candidate& chosen = select_action(candidates);
    if (audit) audit->append(step_index, candidates, chosen.index, calls);

    agent::Step step;
    step.observation = current;
    step.thought = chosen.thought;
    step.action = chosen.action;
    simweb::StepOutcome outcome = session.step(step.action);
    traj.steps.push_back(std::move(step));

    if (outcome.terminated) {
      traj.terminated_reason = simweb::to_string(*outcome.termination_reason);
      break;
    }
    current = outcome.observation;
  }
  return traj;
}

}  // namespace webtwin::wmla
