#include "webtwin/actions.hpp"

#include "webtwin/util.hpp"

namespace webtwin::actions {

using util::ends_with;
using util::trim;

const char* to_string(ActionErrorKind kind) {
  switch (kind) {
    case ActionErrorKind::UnknownVerb: return "UnknownVerb";
    case ActionErrorKind::MissingField: return "MissingField";
    case ActionErrorKind::BadId: return "BadId";
    case ActionErrorKind::BadFlag: return "BadFlag";
    case ActionErrorKind::BadDirection: return "BadDirection";
  }
  return "?";
}

ActionParseError::ActionParseError(ActionErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

TurnParseError::TurnParseError(TurnErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

namespace {

// First bracket group after `pos`; returns the group content and advances
// `pos` past the closing bracket. The group must not contain brackets.
std::string_view simple_group(std::string_view text, size_t& pos, const char* what) {
  while (pos < text.size() && text[pos] == ' ') ++pos;
  if (pos >= text.size() || text[pos] != '[')
    throw ActionParseError(ActionErrorKind::MissingField, std::string("expected [") + what + "]");
  size_t close = text.find(']', pos + 1);
  if (close == std::string_view::npos)
    throw ActionParseError(ActionErrorKind::MissingField, std::string("unterminated [") + what + "]");
  std::string_view group = text.substr(pos + 1, close - pos - 1);
  pos = close + 1;
  return group;
}

int parse_id(std::string_view group) {
  if (group.empty()) throw ActionParseError(ActionErrorKind::BadId, "empty id");
  long value = 0;
  for (char c : group) {
    if (c < '0' || c > '9')
      throw ActionParseError(ActionErrorKind::BadId, "non-numeric id: " + std::string(group));
    value = value * 10 + (c - '0');
    if (value > 1000000000L) throw ActionParseError(ActionErrorKind::BadId, "id out of range");
  }
  if (value <= 0) throw ActionParseError(ActionErrorKind::BadId, "id must be positive");
  return static_cast<int>(value);
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

// `type [id] [content] [press_enter]`; content may itself contain brackets,
// so the id is the first group and the flag, when present, is the last one.
Action parse_type(std::string_view text) {
  size_t pos = 0;
  int id = parse_id(simple_group(text, pos, "id"));

  while (pos < text.size() && text[pos] == ' ') ++pos;
  if (pos >= text.size() || text[pos] != '[')
    throw ActionParseError(ActionErrorKind::MissingField, "expected [content]");
  std::string_view body = util::rtrim(text.substr(pos + 1));
  if (body.empty() || body.back() != ']')
    throw ActionParseError(ActionErrorKind::MissingField, "unterminated [content]");

  TypeText out;
  out.id = id;
  if (ends_with(body, "] [0]") || ends_with(body, "] [1]")) {
    out.press_enter = body[body.size() - 2] == '1';
    out.content = std::string(body.substr(0, body.size() - 5));
    return out;
  }
  // A trailing all-digit group other than [0]/[1] is a bad flag, not content.
  size_t sep = body.rfind("] [");
  if (sep != std::string_view::npos) {
    std::string_view last = body.substr(sep + 3, body.size() - sep - 4);
    if (all_digits(last))
      throw ActionParseError(ActionErrorKind::BadFlag,
                             "press_enter must be 0 or 1, got " + std::string(last));
  }
  out.content = std::string(body.substr(0, body.size() - 1));
  return out;
}

Action parse_stop(std::string_view text) {
  size_t open = text.find('[');
  if (open == std::string_view::npos)
    throw ActionParseError(ActionErrorKind::MissingField, "expected [answer]");
  size_t close = text.rfind(']');
  if (close == std::string_view::npos || close < open)
    throw ActionParseError(ActionErrorKind::MissingField, "unterminated [answer]");
  return Stop{std::string(text.substr(open + 1, close - open - 1))};
}

Action parse_scroll(std::string_view text) {
  size_t pos = 0;
  std::string_view group = simple_group(text, pos, "direction");
  std::string dir = util::to_lower(group);
  if (util::starts_with(dir, "direction=")) dir = dir.substr(10);
  if (dir == "down") return Scroll{ScrollDirection::Down};
  if (dir == "up") return Scroll{ScrollDirection::Up};
  throw ActionParseError(ActionErrorKind::BadDirection,
                         "expected up or down, got " + std::string(group));
}

}  // namespace

Action parse_action(std::string_view text) {
  std::string_view s = trim(text);
  size_t verb_end = 0;
  while (verb_end < s.size() && s[verb_end] != ' ' && s[verb_end] != '[') ++verb_end;
  std::string verb = util::to_lower(s.substr(0, verb_end));
  std::string_view rest = s.substr(verb_end);

  if (verb == "click") {
    size_t pos = 0;
    return Click{parse_id(simple_group(rest, pos, "id"))};
  }
  if (verb == "type") return parse_type(rest);
  if (verb == "scroll") return parse_scroll(rest);
  if (verb == "goback") return GoBack{};
  if (verb == "restart") return Restart{};
  if (verb == "wait") return Wait{};
  if (verb == "stop") return parse_stop(rest);
  throw ActionParseError(ActionErrorKind::UnknownVerb,
                         verb.empty() ? "empty action" : "unknown verb: " + verb);
}

AgentTurn parse_agent_turn(std::string_view text) {
  AgentTurn turn;
  turn.raw = std::string(text);

  size_t thought_pos = text.find("Thought:");
  if (thought_pos == std::string_view::npos)
    throw TurnParseError(TurnErrorKind::NoThought, "no 'Thought:' marker");

  // The thought itself may mention "Action:", so take the LAST occurrence
  // that is followed by a code fence.
  size_t action_pos = std::string_view::npos;
  size_t fence_pos = std::string_view::npos;
  size_t search = thought_pos;
  while (true) {
    size_t cand = text.find("Action:", search + 1);
    if (cand == std::string_view::npos) break;
    size_t fence = text.find("```", cand);
    if (fence != std::string_view::npos) {
      action_pos = cand;
      fence_pos = fence;
    }
    search = cand;
  }
  if (action_pos == std::string_view::npos)
    throw TurnParseError(TurnErrorKind::NoActionFence, "no 'Action:' with a ``` fence");

  std::string_view thought = text.substr(thought_pos + 8, action_pos - thought_pos - 8);
  turn.thought = std::string(trim(thought));
  if (turn.thought.empty())
    throw TurnParseError(TurnErrorKind::NoThought, "empty thought");

  size_t fence_end = text.find("```", fence_pos + 3);
  if (fence_end == std::string_view::npos)
    throw TurnParseError(TurnErrorKind::NoActionFence, "unterminated ``` fence");
  std::string_view inside = text.substr(fence_pos + 3, fence_end - fence_pos - 3);
  turn.action = parse_action(inside);
  return turn;
}

std::string format_action(const Action& a) {
  struct Formatter {
    std::string operator()(const Click& c) const { return "click [" + std::to_string(c.id) + "]"; }
    std::string operator()(const TypeText& t) const {
      return "type [" + std::to_string(t.id) + "] [" + t.content + "] [" +
             (t.press_enter ? "1" : "0") + "]";
    }
    std::string operator()(const Scroll& s) const {
      return s.direction == ScrollDirection::Down ? "scroll [down]" : "scroll [up]";
    }
    std::string operator()(const GoBack&) const { return "goback"; }
    std::string operator()(const Restart&) const { return "restart"; }
    std::string operator()(const Wait&) const { return "wait"; }
    std::string operator()(const Stop& s) const { return "stop [" + s.answer + "]"; }
  };
  return std::visit(Formatter{}, a);
}

const char* verb_of(const Action& a) {
  struct Verb {
    const char* operator()(const Click&) const { return "click"; }
    const char* operator()(const TypeText&) const { return "type"; }
    const char* operator()(const Scroll&) const { return "scroll"; }
    const char* operator()(const GoBack&) const { return "goback"; }
    const char* operator()(const Restart&) const { return "restart"; }
    const char* operator()(const Wait&) const { return "wait"; }
    const char* operator()(const Stop&) const { return "stop"; }
  };
  return std::visit(Verb{}, a);
}

}  // namespace webtwin::actions
