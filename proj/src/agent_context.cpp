#include "webtwin/agent_context.hpp"

#include "webtwin/axtree.hpp"
#include "webtwin/prompts.hpp"
#include "webtwin/util.hpp"

namespace webtwin::agent {

using backend::GenRequest;
using backend::Message;

PolicyContext build_policy_context(const std::string& query, const std::vector<Step>& steps,
                                   const simweb::Observation& current, int k) {
  PolicyContext ctx;
  ctx.query = query;
  ctx.k = k;
  ctx.current = current;

  // The current observation occupies one of the k slots; the most recent
  // k-1 past observations fill the rest.
  int keep_from = static_cast<int>(steps.size()) - (k - 1);
  for (size_t i = 0; i < steps.size(); ++i) {
    PolicyContext::PastStep past;
    if (static_cast<int>(i) >= keep_from) past.observation = steps[i].observation;
    past.thought = steps[i].thought;
    past.action_wire = actions::format_action(steps[i].action);
    ctx.past.push_back(std::move(past));
  }
  return ctx;
}

WorldContext build_world_context(const std::vector<Step>& completed, const simweb::Observation& current,
                                 const actions::Action& scheduled, WorldContext::OutputMode mode) {
  WorldContext ctx;
  ctx.mode = mode;
  for (const Step& step : completed)
    ctx.past.push_back({actions::format_action(step.action), step.wm_thought});
  ctx.last_observation = current;
  ctx.scheduled_wire = actions::format_action(scheduled);
  return ctx;
}

std::string render_observation_wire(const simweb::Observation& obs) {
  std::string out = "URL: " + obs.url + "\n" + obs.axtree;
  if (obs.error_feedback) out += "\n\nNOTE: " + *obs.error_feedback;
  return out;
}

simweb::Observation parse_observation_wire(std::string_view wire) {
  simweb::Observation obs;
  std::string_view rest = wire;
  if (util::starts_with(rest, "URL: ")) {
    size_t nl = rest.find('\n');
    if (nl == std::string_view::npos) {
      obs.url = std::string(rest.substr(5));
      return obs;
    }
    obs.url = std::string(rest.substr(5, nl - 5));
    rest = rest.substr(nl + 1);
  }
  constexpr std::string_view note_sep = "\n\nNOTE: ";
  size_t note = rest.rfind(note_sep);
  if (note != std::string_view::npos &&
      rest.find('\n', note + note_sep.size()) == std::string_view::npos) {
    obs.error_feedback = std::string(rest.substr(note + note_sep.size()));
    rest = rest.substr(0, note);
  }
  obs.axtree = std::string(rest);
  return obs;
}

namespace {

std::string observation_block(const std::optional<simweb::Observation>& obs) {
  if (!obs) return "(observation clipped)";
  return "OBSERVATION:\n" + render_observation_wire(*obs);
}

}  // namespace

std::string render_turn(const std::string& thought, const std::string& action_wire) {
  return "Thought: " + thought + " Action: ```" + action_wire + "```";
}

GenRequest render_policy_prompt(const PolicyContext& ctx, double temperature, int max_tokens,
                                const std::string& extra_instruction) {
  GenRequest req;
  req.system = prompts::kAgentSystem;
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  req.tag = "policy";

  const size_t n = ctx.past.size();
  for (size_t i = 0; i <= n; ++i) {
    std::string content;
    if (i == 0) content = "OBJECTIVE: " + ctx.query + "\n\n";
    if (i == n)
      content += observation_block(ctx.current);
    else
      content += observation_block(ctx.past[i].observation);
    if (i == n && !extra_instruction.empty()) content += "\n\n" + extra_instruction;
    req.messages.push_back({"user", std::move(content)});
    if (i < n)
      req.messages.push_back(
          {"assistant", render_turn(ctx.past[i].thought, ctx.past[i].action_wire)});
  }
  return req;
}

GenRequest render_world_prompt(const WorldContext& ctx, double temperature, int max_tokens) {
  GenRequest req;
  req.system = ctx.mode == WorldContext::OutputMode::Axtree
                   ? std::string(prompts::kWorldAxtree) + "\n\n" + prompts::kWorldOutputProtocol
                   : std::string(prompts::kWorldAbstract);
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  req.tag = "world";

  for (const WorldContext::PastAction& past : ctx.past) {
    req.messages.push_back({"user", "ACTION: " + past.action_wire});
    req.messages.push_back({"assistant", past.rationale ? *past.rationale : "(no rationale)"});
  }
  std::string content = "OBSERVATION:\n" + render_observation_wire(ctx.last_observation) +
                        "\n\nACTION: " + ctx.scheduled_wire;
  req.messages.push_back({"user", std::move(content)});
  return req;
}

std::string diversity_suffix(const std::vector<actions::Action>& prior_actions) {
  if (prior_actions.empty())
    throw std::invalid_argument("diversity_suffix requires at least one prior action");
  std::string out = "Please generate actions different from ";
  for (size_t i = 0; i < prior_actions.size(); ++i) {
    if (i) out += ", ";
    out += actions::format_action(prior_actions[i]);
  }
  return out;
}

int count_observation_blocks(const backend::GenRequest& req) {
  int count = 0;
  for (const Message& m : req.messages) {
    std::string_view text = m.content;
    size_t pos = 0;
    while ((pos = text.find("OBSERVATION:\n", pos)) != std::string_view::npos) {
      if (pos == 0 || text[pos - 1] == '\n') ++count;
      pos += 13;
    }
  }
  return count;
}

WorldPrediction parse_world_output(std::string_view text) {
  WorldPrediction pred;
  std::string_view marker = prompts::kObservationMarker;

  size_t pos = text.find(marker);
  std::string_view payload;
  if (pos == std::string_view::npos) {
    // No marker: treat the whole reply as the observation payload.
    payload = util::trim(text);
  } else {
    pred.has_marker = true;
    pred.rationale = std::string(util::trim(text.substr(0, pos)));
    payload = util::trim(text.substr(pos + marker.size()));
  }

  if (payload == prompts::kTerminalMarker) {
    pred.terminal = true;
    return pred;
  }
  pred.raw_observation = std::string(payload);
  pred.observation = parse_observation_wire(payload);
  if (!pred.observation.url.empty() && !pred.observation.axtree.empty()) {
    axtree::StructuralReport report = axtree::validate_structure(pred.observation.axtree);
    pred.observation_valid = report.valid;
  }
  return pred;
}

}  // namespace webtwin::agent
