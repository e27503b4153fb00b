#include "webtwin/actions.hpp"

#include <random>

#include "doctest.h"

using namespace webtwin::actions;

TEST_CASE("parse_action reference strings") {
  Action a = parse_action("type [7] [JQuery selector for elements with specific class] [1]");
  const auto& t = std::get<TypeText>(a);
  CHECK(t.id == 7);
  CHECK(t.content == "JQuery selector for elements with specific class");
  CHECK(t.press_enter);

  CHECK(std::get<Click>(parse_action("click [3]")).id == 3);
  CHECK(std::get<Stop>(parse_action("stop [N/A]")).answer == "N/A");
  CHECK(std::get<Scroll>(parse_action("scroll [down]")).direction == ScrollDirection::Down);
  CHECK(std::get<Scroll>(parse_action("scroll [direction=up]")).direction == ScrollDirection::Up);
  CHECK(std::holds_alternative<GoBack>(parse_action("goback")));
  CHECK(std::holds_alternative<Restart>(parse_action("restart")));
  CHECK(std::holds_alternative<Wait>(parse_action("wait")));
}

TEST_CASE("type flag handling") {
  // Omitted flag defaults to press_enter=true.
  const auto& t1 = std::get<TypeText>(parse_action("type [7] [weather]"));
  CHECK(t1.press_enter);
  CHECK(t1.content == "weather");

  const auto& t0 = std::get<TypeText>(parse_action("type [7] [x] [0]"));
  CHECK_FALSE(t0.press_enter);

  // Content may contain bracket groups.
  const auto& nested = std::get<TypeText>(parse_action("type [2] [a [b] c] [1]"));
  CHECK(nested.content == "a [b] c");

  try {
    parse_action("type [7] [x] [2]");
    FAIL("expected BadFlag");
  } catch (const ActionParseError& e) {
    CHECK(e.kind() == ActionErrorKind::BadFlag);
  }
}

TEST_CASE("parse_action error taxonomy") {
  try {
    parse_action("fly [3]");
    FAIL("expected UnknownVerb");
  } catch (const ActionParseError& e) {
    CHECK(e.kind() == ActionErrorKind::UnknownVerb);
  }
  try {
    parse_action("click [abc]");
    FAIL("expected BadId");
  } catch (const ActionParseError& e) {
    CHECK(e.kind() == ActionErrorKind::BadId);
  }
  try {
    parse_action("click");
    FAIL("expected MissingField");
  } catch (const ActionParseError& e) {
    CHECK(e.kind() == ActionErrorKind::MissingField);
  }
  try {
    parse_action("scroll [sideways]");
    FAIL("expected BadDirection");
  } catch (const ActionParseError& e) {
    CHECK(e.kind() == ActionErrorKind::BadDirection);
  }
  try {
    parse_action("stop");
    FAIL("expected MissingField");
  } catch (const ActionParseError& e) {
    CHECK(e.kind() == ActionErrorKind::MissingField);
  }
}

TEST_CASE("every prompt verb parses, anything else is UnknownVerb") {
  for (const char* wire : {"click [1]", "type [1] [x] [1]", "wait", "goback", "restart",
                           "stop [done]", "scroll [up]"})
    CHECK_NOTHROW(parse_action(wire));
  for (const char* wire : {"hover [1]", "drag [1]", "submit", "press [enter]"})
    CHECK_THROWS_AS(parse_action(wire), ActionParseError);
}

TEST_CASE("parse_agent_turn") {
  AgentTurn turn = parse_agent_turn("Thought: search first Action: ```type [7] [weather] [1]```");
  CHECK(turn.thought == "search first");
  CHECK(std::get<TypeText>(turn.action).content == "weather");
  CHECK(turn.raw.find("search first") != std::string::npos);

  AgentTurn stop = parse_agent_turn("Thought: done Action: ```stop [42]```");
  CHECK(std::get<Stop>(stop.action).answer == "42");

  // The thought may itself mention "Action:"; the last fenced one wins.
  AgentTurn chatty = parse_agent_turn(
      "Thought: the next Action: should be careful Action: ```click [2]```");
  CHECK(chatty.thought == "the next Action: should be careful");
  CHECK(std::get<Click>(chatty.action).id == 2);

  CHECK_THROWS_AS(parse_agent_turn("I will click."), TurnParseError);
  try {
    parse_agent_turn("I will click.");
    FAIL("expected NoThought");
  } catch (const TurnParseError& e) {
    CHECK(e.kind() == TurnErrorKind::NoThought);
  }
  try {
    parse_agent_turn("Thought: no fence Action: click [2]");
    FAIL("expected NoActionFence");
  } catch (const TurnParseError& e) {
    CHECK(e.kind() == TurnErrorKind::NoActionFence);
  }
}

TEST_CASE("format_action reference strings") {
  CHECK(format_action(TypeText{7, "x", false}) == "type [7] [x] [0]");
  CHECK(format_action(GoBack{}) == "goback");
  CHECK(format_action(Scroll{ScrollDirection::Down}) == "scroll [down]");
  CHECK(format_action(Stop{"N/A"}) == "stop [N/A]");
}

namespace {

// Random content including bracket and quote characters.
std::string random_content(std::mt19937& rng, bool allow_empty) {
  static const char alphabet[] = "abc XYZ[]'\"()/:,.-_$%][";
  size_t len = rng() % 24;
  if (!allow_empty && len == 0) len = 1;
  std::string out;
  for (size_t i = 0; i < len; ++i)
    out += alphabet[rng() % (sizeof(alphabet) - 1)];
  return out;
}

Action random_action(std::mt19937& rng) {
  switch (rng() % 7) {
    case 0: return Click{1 + static_cast<int>(rng() % 9999)};
    case 1:
      return TypeText{1 + static_cast<int>(rng() % 9999), random_content(rng, true),
                      rng() % 2 == 0};
    case 2: return Scroll{rng() % 2 ? ScrollDirection::Up : ScrollDirection::Down};
    case 3: return GoBack{};
    case 4: return Restart{};
    case 5: return Wait{};
    default: return Stop{random_content(rng, true)};
  }
}

}  // namespace

TEST_CASE("parse/format closure over random actions") {
  std::mt19937 rng(7771);
  for (int i = 0; i < 12000; ++i) {
    Action a = random_action(rng);
    std::string wire = format_action(a);
    Action back = parse_action(wire);
    CHECK(wire_equal(a, back));
    CHECK(format_action(back) == wire);
  }
}

TEST_CASE("turn parsing never yields a turn without a fence") {
  std::mt19937 rng(515);
  for (int i = 0; i < 3000; ++i) {
    size_t len = rng() % 160;
    std::string input;
    for (size_t j = 0; j < len; ++j) input += static_cast<char>(rng() % 256);
    if (input.find("```") != std::string::npos) continue;
    CHECK_THROWS(parse_agent_turn(input));
  }
}
