#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace webtwin::actions {

enum class ScrollDirection { Up, Down };

struct Click {
  int id = 0;
};

struct TypeText {
  int id = 0;
  std::string content;
  bool press_enter = true;
};

struct Scroll {
  ScrollDirection direction = ScrollDirection::Down;
};

struct GoBack {};
struct Restart {};
struct Wait {};

struct Stop {
  std::string answer;  // "N/A" when the task is judged impossible
};

using Action = std::variant<Click, TypeText, Scroll, GoBack, Restart, Wait, Stop>;

enum class ActionErrorKind { UnknownVerb, MissingField, BadId, BadFlag, BadDirection };

const char* to_string(ActionErrorKind kind);

class ActionParseError : public std::runtime_error {
 public:
  ActionParseError(ActionErrorKind kind, const std::string& message);
  ActionErrorKind kind() const { return kind_; }

 private:
  ActionErrorKind kind_;
};

enum class TurnErrorKind { NoThought, NoActionFence };

class TurnParseError : public std::runtime_error {
 public:
  TurnParseError(TurnErrorKind kind, const std::string& message);
  TurnErrorKind kind() const { return kind_; }

 private:
  TurnErrorKind kind_;
};

// One model reply: "Thought: ... Action: ```...```".
struct AgentTurn {
  std::string thought;
  Action action;
  std::string raw;  // original model output, verbatim
};

Action parse_action(std::string_view text);
AgentTurn parse_agent_turn(std::string_view text);

// parse_action(format_action(a)) == a for every valid Action.
std::string format_action(const Action& a);

const char* verb_of(const Action& a);

inline bool wire_equal(const Action& a, const Action& b) {
  return format_action(a) == format_action(b);
}

}  // namespace webtwin::actions
