#include "webtwin/improve.hpp"

#include <algorithm>
#include <set>

#include "webtwin/axtree.hpp"
#include "webtwin/prompts.hpp"
#include "webtwin/util.hpp"

namespace webtwin::improve {

using backend::GenRequest;
using nlohmann::json;

rollout::JudgeVerdict judge_trajectory(const rollout::Trajectory& trajectory,
                                       const JudgeSpec& judge,
                                       const std::map<std::string, simweb::SiteSpec>& sites) {
  if (trajectory.terminated_reason.empty())
    throw JudgeError("cannot judge an unterminated trajectory: " + trajectory.trajectory_id);

  rollout::JudgeVerdict verdict;

  if (judge.kind == JudgeKind::Rule) {
    auto site = sites.find(trajectory.task.site);
    if (site == sites.end())
      throw JudgeError("rule judge: unknown site " + trajectory.task.site);
    simweb::GoalEvidence evidence = simweb::replay_actions(
        site->second, trajectory.task.start_page, trajectory.action_sequence());
    verdict.accepted = simweb::check_goal(trajectory.task, evidence);
    verdict.score = verdict.accepted ? 1.0 : 0.0;
    verdict.detail = "rule: final page " + evidence.final_page;
    return verdict;
  }

  if (!judge.backend) throw JudgeError("model judge requires a backend");

  std::string final_obs = trajectory.steps.empty()
                              ? "(no observation)"
                              : agent::render_observation_wire(trajectory.steps.back().observation);
  std::string final_response = "(none)";
  if (!trajectory.steps.empty())
    if (const auto* stop = std::get_if<actions::Stop>(&trajectory.steps.back().action))
      final_response = stop->answer;

  GenRequest req;
  req.system = prompts::kTrajectoryEval;
  req.temperature = 0.0;
  req.max_tokens = 1024;
  req.tag = "judge";
  req.messages.push_back(
      {"user", "Web Task Instruction: " + trajectory.task.query + "\n\n" +
                   "Result Webpage Accessibility Tree:\n" + final_obs + "\n\n" +
                   "Result Response: " + final_response});

  std::string reply = judge.backend->generate(req).text;

  // The prompt asks for elaboration first, so the LAST verdict token wins.
  size_t success = reply.rfind("SUCCESS");
  if (success == std::string::npos)
    throw JudgeError("UnparsableVerdict: no SUCCESS / NOT SUCCESS in judge reply");
  bool negative = success >= 4 && reply.compare(success - 4, 4, "NOT ") == 0;
  verdict.accepted = !negative;
  verdict.score = verdict.accepted ? 1.0 : 0.0;
  verdict.detail = "model verdict";
  return verdict;
}

std::string trajectory_content_hash(const rollout::Trajectory& t) {
  util::Fnv64 h;
  h.bytes(t.task.id);
  for (const agent::Step& step : t.steps) {
    h.byte('\n');
    h.bytes(actions::format_action(step.action));
  }
  return h.hex();
}

IterationLedger advance_iteration(const IterationLedger& ledger,
                                  const std::vector<rollout::Trajectory>& new_accepted,
                                  int* dropped_duplicates) {
  IterationLedger next = ledger;
  next.iteration = ledger.iteration + 1;
  int dropped = 0;

  std::set<std::string> ids(ledger.accepted.begin(), ledger.accepted.end());
  for (const rollout::Trajectory& t : new_accepted) {
    if (!t.judge_verdict || !t.judge_verdict->accepted)
      throw LedgerError("trajectory " + t.trajectory_id + " was not judged accepted");
    if (ids.count(t.trajectory_id))
      throw LedgerError("DuplicateTrajectory: id " + t.trajectory_id + " already in the ledger");
    std::string hash = trajectory_content_hash(t);
    if (next.dedup.count(hash)) {
      ++dropped;  // identical re-success of a known solution
      continue;
    }
    ids.insert(t.trajectory_id);
    next.accepted.push_back(t.trajectory_id);
    next.dedup.emplace(hash, t.trajectory_id);
    next.provenance[t.trajectory_id] = {next.iteration, t.source, t.task.id};
  }
  if (dropped_duplicates) *dropped_duplicates = dropped;
  return next;
}

json ledger_to_json(const IterationLedger& ledger) {
  json provenance = json::object();
  for (const auto& [id, p] : ledger.provenance)
    provenance[id] = {{"iteration_collected", p.iteration_collected},
                      {"source", rollout::to_string(p.source)},
                      {"task", p.task_id}};
  return json{
      {"iteration", ledger.iteration},
      {"query_pool", ledger.query_pool},
      {"accepted", ledger.accepted},
      {"provenance", provenance},
      {"dedup", ledger.dedup},
      {"trajectory_files", ledger.trajectory_files},
      {"dataset_files", ledger.dataset_files},
  };
}

IterationLedger ledger_from_json(const json& j) {
  IterationLedger ledger;
  ledger.iteration = j.value("iteration", 0);
  for (const auto& q : j.value("query_pool", json::array()))
    ledger.query_pool.push_back(q.get<std::string>());
  for (const auto& a : j.value("accepted", json::array()))
    ledger.accepted.push_back(a.get<std::string>());
  if (j.contains("provenance"))
    for (const auto& [id, p] : j["provenance"].items())
      ledger.provenance[id] = {p.value("iteration_collected", 0),
                               rollout::source_from_string(p.value("source", "real")),
                               p.value("task", "")};
  if (j.contains("dedup"))
    for (const auto& [hash, id] : j["dedup"].items()) ledger.dedup[hash] = id.get<std::string>();
  for (const auto& f : j.value("trajectory_files", json::array()))
    ledger.trajectory_files.push_back(f.get<std::string>());
  for (const auto& f : j.value("dataset_files", json::array()))
    ledger.dataset_files.push_back(f.get<std::string>());
  return ledger;
}

std::vector<simweb::TaskSpec> select_synthesis_queries(const IterationLedger& ledger,
                                                       const std::vector<simweb::TaskSpec>& pool) {
  std::set<std::string> solved;
  for (const auto& [id, p] : ledger.provenance)
    if (p.source == rollout::Source::Real) solved.insert(p.task_id);

  std::vector<simweb::TaskSpec> out;
  for (const simweb::TaskSpec& task : pool)
    if (!solved.count(task.id)) out.push_back(task);
  return out;
}

json sft_record_to_json(const SftRecord& r) {
  json messages = json::array();
  for (const backend::Message& m : r.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  return json{
      {"system", r.system},
      {"messages", messages},
      {"completion", r.target},
      {"meta",
       {{"role", r.role}, {"trajectory_id", r.trajectory_id}, {"step_index", r.step_index}}},
  };
}

std::vector<SftRecord> emit_policy_sft(const std::vector<rollout::Trajectory>& trajectories,
                                       int k_obs) {
  std::vector<SftRecord> out;
  for (const rollout::Trajectory& t : trajectories) {
    for (size_t i = 0; i < t.steps.size(); ++i) {
      std::vector<agent::Step> prior(t.steps.begin(), t.steps.begin() + static_cast<long>(i));
      agent::PolicyContext ctx =
          agent::build_policy_context(t.task.query, prior, t.steps[i].observation, k_obs);
      GenRequest req = agent::render_policy_prompt(ctx, 0.0, 0);

      SftRecord record;
      record.role = "policy";
      record.system = req.system;
      record.messages = req.messages;
      record.target =
          agent::render_turn(t.steps[i].thought, actions::format_action(t.steps[i].action));
      record.trajectory_id = t.trajectory_id;
      record.step_index = static_cast<int>(i);
      out.push_back(std::move(record));
    }
  }
  return out;
}

namespace {

std::string distill_rationale(backend::TextBackend& distiller, const agent::Step& from,
                              const simweb::Observation& to) {
  GenRequest req;
  req.system = prompts::kTransitionRationale;
  req.temperature = 0.0;
  req.max_tokens = 256;
  req.tag = "policy";
  req.messages.push_back(
      {"user", "OBSERVATION:\n" + agent::render_observation_wire(from.observation) +
                   "\n\nACTION: " + actions::format_action(from.action) +
                   "\n\nNEXT OBSERVATION:\n" + agent::render_observation_wire(to)});
  return std::string(util::trim(distiller.generate(req).text));
}

}  // namespace

std::vector<SftRecord> emit_world_sft(const std::vector<rollout::Trajectory>& trajectories,
                                      const WorldSftOptions& options) {
  std::vector<SftRecord> out;
  for (const rollout::Trajectory& t : trajectories) {
    // Work on a patched copy so a rationale distilled for transition i also
    // appears in the contexts of transitions i+1, i+2, ...
    std::vector<agent::Step> steps = t.steps;
    for (size_t i = 0; i + 1 < steps.size(); ++i) {
      agent::Step& acting = steps[i];
      const simweb::Observation& next_obs = steps[i + 1].observation;

      if (!acting.wm_thought || acting.wm_thought->empty()) {
        if (options.distiller) {
          acting.wm_thought = distill_rationale(*options.distiller, acting, next_obs);
        } else if (options.strict) {
          throw MissingRationale("trajectory " + t.trajectory_id + " step " + std::to_string(i) +
                                 " has no transition rationale");
        }
      }

      std::vector<agent::Step> completed(steps.begin(), steps.begin() + static_cast<long>(i));
      agent::WorldContext ctx = agent::build_world_context(
          completed, acting.observation, acting.action, agent::WorldContext::OutputMode::Axtree);
      GenRequest req = agent::render_world_prompt(ctx, 0.0, 0);

      SftRecord record;
      record.role = "world";
      record.system = req.system;
      record.messages = req.messages;
      record.target = (acting.wm_thought ? *acting.wm_thought : "") + "\n" +
                      prompts::kObservationMarker + "\n" +
                      agent::render_observation_wire(next_obs);
      record.trajectory_id = t.trajectory_id;
      record.step_index = static_cast<int>(i);
      out.push_back(std::move(record));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Intrinsic evaluation.

std::string depth_bucket(int depth) {
  if (depth <= 1) return "1";
  if (depth == 2) return "2";
  if (depth == 3) return "3";
  return "4plus";
}

namespace {

// Finds "<label>" then the first "Score:" after it; the score must be one of
// 0, 1, 2, 3.
int parse_metric_score(const std::string& reply, const std::string& label) {
  size_t pos = reply.find(label);
  if (pos == std::string::npos) throw UnparsableScores("missing '" + label + "' in judge reply");
  size_t score_pos = reply.find("Score:", pos);
  if (score_pos == std::string::npos)
    throw UnparsableScores("missing 'Score:' after '" + label + "'");
  size_t i = score_pos + 6;
  while (i < reply.size() && reply[i] == ' ') ++i;
  if (i >= reply.size() || reply[i] < '0' || reply[i] > '3')
    throw UnparsableScores("score after '" + label + "' must be 0..3");
  if (i + 1 < reply.size() && reply[i + 1] >= '0' && reply[i + 1] <= '9')
    throw UnparsableScores("score after '" + label + "' must be a single digit 0..3");
  return reply[i] - '0';
}

}  // namespace

IntrinsicReport intrinsic_eval(const std::vector<IntrinsicSample>& samples,
                               backend::TextBackend& judge) {
  IntrinsicReport report;

  for (const IntrinsicSample& sample : samples) {
    GenRequest req;
    req.system = prompts::kIntrinsicEval;
    req.temperature = 0.0;
    req.max_tokens = 1024;
    req.tag = "judge";
    req.messages.push_back({"user", "Generated accessibility tree:\n" + sample.predicted_tree +
                                        "\n\nGround truth accessibility tree:\n" +
                                        sample.ground_truth_tree});
    std::string reply = judge.generate(req).text;

    IntrinsicScores scores;
    scores.depth = sample.depth;
    int str_raw = parse_metric_score(reply, "Structure Correctness");
    int sim_raw = parse_metric_score(reply, "Similarity");
    int oa_raw = parse_metric_score(reply, "Overall Functionality Assessment");

    scores.structurally_valid = axtree::validate_structure(sample.predicted_tree).valid;
    scores.str = scores.structurally_valid ? str_raw / 3.0 : 0.0;
    scores.sim = sim_raw / 3.0;
    scores.oa = oa_raw / 3.0;
    report.per_sample.push_back(scores);
  }

  auto add = [](IntrinsicAggregate& agg, const IntrinsicScores& s) {
    agg.str += s.str;
    agg.sim += s.sim;
    agg.oa += s.oa;
    agg.count += 1;
  };
  for (const IntrinsicScores& s : report.per_sample) {
    add(report.buckets[depth_bucket(s.depth)], s);
    add(report.overall, s);
  }
  auto finish = [](IntrinsicAggregate& agg) {
    if (agg.count == 0) return;
    agg.str /= agg.count;
    agg.sim /= agg.count;
    agg.oa /= agg.count;
  };
  for (auto& [key, agg] : report.buckets) finish(agg);
  finish(report.overall);
  return report;
}

json intrinsic_report_to_json(const IntrinsicReport& report) {
  json buckets = json::object();
  for (const std::string key : {"1", "2", "3", "4plus"}) {
    auto it = report.buckets.find(key);
    if (it == report.buckets.end()) {
      buckets[key] = {{"str", nullptr}, {"sim", nullptr}, {"oa", nullptr}, {"count", 0}};
    } else {
      buckets[key] = {{"str", it->second.str},
                      {"sim", it->second.sim},
                      {"oa", it->second.oa},
                      {"count", it->second.count}};
    }
  }
  json per_sample = json::array();
  for (const IntrinsicScores& s : report.per_sample)
    per_sample.push_back({{"depth", s.depth},
                          {"str", s.str},
                          {"sim", s.sim},
                          {"oa", s.oa},
                          {"structurally_valid", s.structurally_valid}});
  return json{
      {"per_sample", per_sample},
      {"buckets", buckets},
      {"overall",
       {{"str", report.overall.str},
        {"sim", report.overall.sim},
        {"oa", report.overall.oa},
        {"count", report.overall.count}}},
  };
}

}  // namespace webtwin::improve
