#include "demo_brains.hpp"

#include <stdexcept>

#include "webtwin/actions.hpp"
#include "webtwin/prompts.hpp"
#include "webtwin/rollout.hpp"
#include "webtwin/util.hpp"

namespace webtwin::demo {

using backend::CallbackBackend;
using backend::GenRequest;
using util::starts_with;

namespace {

// --------------------------------------------------------------------------
// Demo site content.

std::string story_page() {
  std::string out =
      "Tab 0 (current): Top Story\n\n"
      "[1] RootWebArea 'Top Story' focused: true\n"
      "\t[2] heading 'Council approves park renovation'";
  for (int i = 1; i <= 80; ++i)
    out += "\n\t[" + std::to_string(i + 2) + "] statictext 'Paragraph " + std::to_string(i) +
           " of the report.'";
  return out;
}

void write_searchhub(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  util::write_file((dir / "home.axt").string(),
                   "Tab 0 (current): SearchHub\n\n"
                   "[1] RootWebArea 'SearchHub' focused: true\n"
                   "\t[2] link 'News'\n"
                   "\t[3] link 'About'\n"
                   "\t[4] button 'Apps' expanded: false\n"
                   "\t[7] combobox 'Search' focused: true autocomplete: both hasPopup: listbox "
                   "required: false expanded: false");

  util::write_file((dir / "results_weather.axt").string(),
                   "Tab 0 (current): SearchHub Results\n\n"
                   "[1] RootWebArea 'SearchHub Results' focused: true\n"
                   "\t[2] link 'Home'\n"
                   "\t[10] link 'Unrelated result A'\n"
                   "\t[11] link 'Unrelated result B'\n"
                   "\t[12] link 'Weather Today - hourly forecast'\n"
                   "\t[13] link 'Historic weather archive'");

  util::write_file((dir / "weather.axt").string(),
                   "Tab 0 (current): Weather Today\n\n"
                   "[1] RootWebArea 'Weather Today' focused: true\n"
                   "\t[2] heading 'Weather Today'\n"
                   "\t[3] statictext 'Currently: Sunny, 21C with a light breeze.'\n"
                   "\t[4] statictext 'Tonight: clear skies, 14C.'");

  util::write_file((dir / "news.axt").string(),
                   "Tab 0 (current): SearchHub News\n\n"
                   "[1] RootWebArea 'SearchHub News' focused: true\n"
                   "\t[2] link 'Home'\n"
                   "\t[5] link 'Top Story: Council approves park renovation'\n"
                   "\t[6] link 'Local bakery wins regional award'\n"
                   "\t[8] link 'Transit schedule changes next month'");

  util::write_file((dir / "story.axt").string(), story_page());

  util::write_file((dir / "site.toml").string(), R"(start_page = "home"
homepage = "home"
window_lines = 40

[pages.home]
url = "https://searchhub.example/"
axtree = "home.axt"

[pages.results_weather]
url = "https://searchhub.example/results?q=weather"
axtree = "results_weather.axt"

[pages.weather]
url = "https://searchhub.example/weather"
axtree = "weather.axt"

[pages.news]
url = "https://searchhub.example/news"
axtree = "news.axt"

[pages.story]
url = "https://searchhub.example/news/top-story"
axtree = "story.axt"

[[edges]]
from = "home"
verb = "click"
target = 2
to = "news"

[[edges]]
from = "home"
verb = "type"
target = 7
content = "weather"
to = "results_weather"

[[edges]]
from = "results_weather"
verb = "click"
target = 12
to = "weather"

[[edges]]
from = "results_weather"
verb = "click"
target = 2
to = "home"

[[edges]]
from = "news"
verb = "click"
target = 5
to = "story"

[[edges]]
from = "news"
verb = "click"
target = 2
to = "home"
)");
}

void write_shopdemo(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  util::write_file((dir / "catalog.axt").string(),
                   "Tab 0 (current): ShopDemo Catalog\n\n"
                   "[1] RootWebArea 'ShopDemo Catalog' focused: true\n"
                   "\t[2] heading 'Featured items'\n"
                   "\t[21] link 'Blue ceramic mug - $12.50'\n"
                   "\t[22] link 'Green teapot - $24.00'\n"
                   "\t[23] link 'Canvas tote bag - $9.00'\n"
                   "\t[30] link 'Lamps & lighting'");

  util::write_file((dir / "item_mug.axt").string(),
                   "Tab 0 (current): Blue ceramic mug\n\n"
                   "[1] RootWebArea 'Blue ceramic mug' focused: true\n"
                   "\t[2] heading 'Blue ceramic mug'\n"
                   "\t[3] statictext 'Hand-glazed stoneware, 350ml. $12.50'\n"
                   "\t[9] button 'Add to cart'\n"
                   "\t[10] link 'Back to catalog'");

  util::write_file((dir / "cart.axt").string(),
                   "Tab 0 (current): Your cart\n\n"
                   "[1] RootWebArea 'Your cart' focused: true\n"
                   "\t[2] heading 'Your cart'\n"
                   "\t[3] statictext 'Blue ceramic mug x1 - $12.50'\n"
                   "\t[4] statictext 'Subtotal: $12.50'");

  util::write_file((dir / "site.toml").string(), R"(start_page = "catalog"
homepage = "catalog"
window_lines = 40

[pages.catalog]
url = "https://shopdemo.example/catalog"
axtree = "catalog.axt"

[pages.item_mug]
url = "https://shopdemo.example/item/blue-mug"
axtree = "item_mug.axt"

[pages.cart]
url = "https://shopdemo.example/cart"
axtree = "cart.axt"

[[edges]]
from = "catalog"
verb = "click"
target = 21
to = "item_mug"

[[edges]]
from = "item_mug"
verb = "click"
target = 9
to = "cart"

[[edges]]
from = "item_mug"
verb = "click"
target = 10
to = "catalog"
)");
}

}  // namespace

void write_demo_inputs(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "replay");
  write_searchhub(dir / "sites" / "searchhub");
  write_shopdemo(dir / "sites" / "shopdemo");

  util::write_file(
      (dir / "tasks.jsonl").string(),
      R"({"id":"t1_weather","site":"searchhub","query":"What is the weather today?","start_page":"home","goal":{"kind":"stop_answer_matches","pattern":"Sunny"}}
{"id":"t2_news","site":"searchhub","query":"Open the top news story and read to the end of the article.","start_page":"home","goal":{"kind":"reach_page","page":"story"}}
{"id":"t3_sports","site":"searchhub","query":"Find yesterday's basketball score.","start_page":"home","goal":{"kind":"stop_answer_matches","pattern":"Lakers"}}
{"id":"t4_mug","site":"shopdemo","query":"Add the blue ceramic mug to the cart.","start_page":"catalog","goal":{"kind":"reach_page","page":"cart"}}
{"id":"t5_lamp","site":"shopdemo","query":"What is the price of the red lamp?","start_page":"catalog","goal":{"kind":"stop_answer_matches","pattern":"\\$30"}}
)");

  util::write_file(
      (dir / "tasks_wmla.jsonl").string(),
      R"({"id":"t6_forecast","site":"searchhub","query":"Find today's weather forecast page.","start_page":"home","goal":{"kind":"reach_page","page":"weather"}}
)");

  util::write_file((dir / "config.json").string(), R"({
  "sites_dir": "sites",
  "tasks_file": "tasks.jsonl",
  "output_dir": "out",
  "seed": 7,
  "parallelism": 1,
  "backends": {
    "policy": {"kind": "replay", "script": "replay/policy.jsonl"},
    "world": {"kind": "replay", "script": "replay/world.jsonl"},
    "judge": {"kind": "replay", "script": "replay/judge.jsonl"}
  },
  "judge": {"collect": "rule", "synthesize": "model"},
  "rollout": {
    "k_obs": 3,
    "step_limit": 15,
    "synthetic_max_steps": 7,
    "policy_temperature": 0.0,
    "max_malformed_retries": 2
  },
  "wmla": {"k": 3, "d": 2, "explore_temperature": 0.7, "scorer": "rule", "tasks_file": "tasks_wmla.jsonl"},
  "emit": {"distill": true},
  "wm_eval": {"max_depth": 4},
  "logging": {"backend_audit": true}
}
)");
}

// --------------------------------------------------------------------------
// Request inspection helpers.

namespace {

std::string first_line_value(const std::string& text, const std::string& prefix) {
  size_t pos = text.find(prefix);
  if (pos == std::string::npos) return "";
  if (pos != 0 && text[pos - 1] != '\n') return "";
  size_t end = text.find('\n', pos);
  size_t start = pos + prefix.size();
  return end == std::string::npos ? text.substr(start) : text.substr(start, end - start);
}

struct PolicyView {
  std::string query;
  std::string url;
  std::string last_user;
  int suffix_actions = 0;  // 0 = no diversity suffix
  bool has_note = false;
};

PolicyView inspect_policy(const GenRequest& req) {
  PolicyView view;
  if (!req.messages.empty()) {
    view.query = first_line_value(req.messages.front().content, "OBJECTIVE: ");
    for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
      if (it->role != "user") continue;
      view.last_user = it->content;
      break;
    }
  }
  view.url = first_line_value(view.last_user, "URL: ");
  view.has_note = view.last_user.find("\nNOTE: ") != std::string::npos;

  size_t suffix = view.last_user.find("Please generate actions different from ");
  if (suffix != std::string::npos) {
    std::string listed = view.last_user.substr(suffix + 40);
    view.suffix_actions = 1;
    size_t pos = 0;
    while ((pos = listed.find(", ", pos)) != std::string::npos) {
      ++view.suffix_actions;
      pos += 2;
    }
  }
  return view;
}

std::string turn(const std::string& thought, const std::string& wire) {
  return "Thought: " + thought + " Action: ```" + wire + "```";
}

std::string policy_reply(const PolicyView& v) {
  const std::string& q = v.query;
  const std::string& url = v.url;
  bool alt1 = v.suffix_actions == 1;
  bool alt2 = v.suffix_actions >= 2;

  if (q == "What is the weather today?") {
    if (url == "https://searchhub.example/")
      return turn("I should search for the weather.", "type [7] [weather today] [1]");
    if (starts_with(url, "https://searchhub.example/results"))
      return turn("The third result is today's weather.", "click [12]");
    if (url == "https://searchhub.example/weather")
      return turn("The page reports the current conditions.", "stop [Sunny, 21C]");
  }

  if (q == "Open the top news story and read to the end of the article.") {
    if (url == "https://searchhub.example/")
      return turn("The news section should have the story.", "click [2]");
    if (url == "https://searchhub.example/news")
      return turn("Open the top story.", "click [5]");
    if (url == "https://searchhub.example/news/top-story") {
      if (v.last_user.find("[2] heading") != std::string::npos)
        return turn("I am at the top of the article, keep reading.", "scroll [down]");
      if (v.last_user.find("[21] statictext") != std::string::npos)
        return turn("More paragraphs below.", "scroll [down]");
      return turn("That is the end of the article.",
                  "stop [Council approves park renovation]");
    }
  }

  if (q == "Find yesterday's basketball score.") {
    if (url == "https://searchhub.example/" && !v.has_note)
      return turn("Maybe there is a sports section.", "click [77]");
    if (url == "https://searchhub.example/" && v.has_note)
      return turn("There is no sports section on this site.", "stop [N/A]");
    if (url == "https://searchhub.example/sports")
      return turn("The final score is right here.", "stop [Lakers 102, Celtics 99]");
  }

  if (q == "Add the blue ceramic mug to the cart.") {
    if (url == "https://shopdemo.example/catalog")
      return turn("Open the mug product page.", "click [21]");
    if (url == "https://shopdemo.example/item/blue-mug")
      return turn("Add it to the cart.", "click [9]");
    if (url == "https://shopdemo.example/cart")
      return turn("The cart now contains the mug.",
                  "stop [Added the blue ceramic mug to the cart]");
  }

  if (q == "What is the price of the red lamp?") {
    if (url == "https://shopdemo.example/catalog" && !v.has_note)
      return turn("The lighting category might list lamps.", "click [30]");
    if (url == "https://shopdemo.example/catalog" && v.has_note)
      return turn("No lamp pages are reachable.", "stop [N/A]");
    if (url == "https://shopdemo.example/lamps")
      return turn("The red lamp price is listed.", "stop [The red lamp costs $30.00]");
  }

  if (q == "Find today's weather forecast page.") {
    if (url == "https://searchhub.example/") {
      if (alt2) return turn("Maybe the about page links a forecast.", "click [3]");
      if (alt1) return turn("Search for the forecast directly.", "type [7] [weather forecast] [1]");
      return turn("The news section might mention the forecast.", "click [2]");
    }
    if (starts_with(url, "https://searchhub.example/results")) {
      if (alt2) return turn("Check an unrelated result.", "click [10]");
      if (alt1) return turn("Go back to the start page.", "goback");
      if (v.has_note) return turn("Look further down the results.", "scroll [down]");
      return turn("Open the weather result.", "click [12]");
    }
    if (url == "https://searchhub.example/news") {
      if (alt2) return turn("Go back instead.", "goback");
      if (alt1) return turn("Try the bakery story.", "click [6]");
      return turn("Open the top story.", "click [5]");
    }
    if (url == "https://searchhub.example/news/top-story") {
      if (alt2) return turn("Go back instead.", "goback");
      if (alt1) return turn("Read further.", "scroll [down]");
      return turn("This story has no forecast.", "stop [No forecast in the news]");
    }
    if (url == "https://searchhub.example/weather") {
      if (alt2) return turn("Scroll for more detail.", "scroll [down]");
      if (alt1) return turn("Go back to the results.", "goback");
      return turn("This is the forecast page.", "stop [Sunny, 21C with a light breeze]");
    }
    if (url == "https://searchhub.example/sports")
      return turn("This is not a forecast.", "goback");
  }

  throw std::runtime_error("policy brain: unscripted request (query='" + q + "', url='" + url +
                           "', suffix=" + std::to_string(v.suffix_actions) + ")");
}

std::string distill_reply(const GenRequest& req) {
  const std::string& content = req.messages.back().content;
  std::string wire;
  size_t action = content.find("\n\nACTION: ");
  size_t next_obs = content.find("\n\nNEXT OBSERVATION:\n");
  if (action != std::string::npos && next_obs != std::string::npos && next_obs > action)
    wire = content.substr(action + 10, next_obs - action - 10);
  std::string url = first_line_value(content.substr(next_obs == std::string::npos ? 0 : next_obs),
                                     "URL: ");
  return "Taking '" + wire + "' leads to the page at " + url + ".";
}

}  // namespace

std::shared_ptr<backend::TextBackend> make_policy_brain(
    const std::map<std::string, simweb::SiteSpec>&) {
  return std::make_shared<CallbackBackend>([](const GenRequest& req) {
    if (req.system == prompts::kTransitionRationale) return distill_reply(req);
    return policy_reply(inspect_policy(req));
  });
}

// --------------------------------------------------------------------------
// World brain: library oracle per site, plus two scripted hallucinations for
// the queries that never succeed against the real site graph.

std::shared_ptr<backend::TextBackend> make_world_brain(
    const std::map<std::string, simweb::SiteSpec>& sites) {
  auto oracles = std::make_shared<std::map<std::string, std::shared_ptr<backend::TextBackend>>>();
  for (const auto& [id, site] : sites)
    oracles->emplace(id, rollout::oracle_world(site, site.start_page));

  return std::make_shared<CallbackBackend>([oracles](const GenRequest& req) -> std::string {
    // Collect the action chain the same way the oracle does.
    std::vector<std::string> wires;
    for (const backend::Message& m : req.messages) {
      if (m.role != "user") continue;
      if (starts_with(m.content, "ACTION: ")) {
        wires.push_back(m.content.substr(8));
        continue;
      }
      size_t pos = m.content.rfind("\n\nACTION: ");
      if (pos != std::string::npos) wires.push_back(m.content.substr(pos + 10));
    }

    std::string url;
    for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
      if (it->role != "user") continue;
      url = first_line_value(it->content, "URL: ");
      break;
    }

    if (wires.size() == 1 && wires[0] == "click [77]" &&
        url.find("searchhub.example") != std::string::npos) {
      return "Clicking opens the sports results page.\n---OBSERVATION---\n"
             "URL: https://searchhub.example/sports\n"
             "Tab 0 (current): SearchHub Sports\n\n"
             "[1] RootWebArea 'SearchHub Sports' focused: true\n"
             "\t[2] heading 'Basketball'\n"
             "\t[3] statictext 'Final: Lakers 102, Celtics 99.'\n"
             "\t[4] statictext 'Recap: a tight fourth quarter decided it.'";
    }
    if (wires.size() == 1 && wires[0] == "click [30]" &&
        url.find("shopdemo.example") != std::string::npos) {
      return "Clicking the category opens the lighting catalog.\n---OBSERVATION---\n"
             "URL: https://shopdemo.example/lamps\n"
             "Tab 0 (current): ShopDemo Lamps\n\n"
             "[1] RootWebArea 'ShopDemo Lamps' focused: true\n"
             "\t[2] heading 'Lamps & lighting'\n"
             "\t[3] statictext 'Red lamp - $30.00'\n"
             "\t[4] statictext 'Brass floor lamp - $75.00'";
    }

    std::string site_id;
    if (url.find("searchhub.example") != std::string::npos) site_id = "searchhub";
    if (url.find("shopdemo.example") != std::string::npos) site_id = "shopdemo";
    auto it = oracles->find(site_id);
    if (it == oracles->end())
      throw std::runtime_error("world brain: cannot route request (url='" + url + "')");
    return it->second->generate(req).text;
  });
}

// --------------------------------------------------------------------------
// Judge brain: trajectory verdicts and intrinsic tree scoring.

std::shared_ptr<backend::TextBackend> make_judge_brain() {
  return std::make_shared<CallbackBackend>([](const GenRequest& req) -> std::string {
    const std::string& content = req.messages.back().content;

    if (req.system == prompts::kIntrinsicEval) {
      const std::string sep = "\n\nGround truth accessibility tree:\n";
      size_t pos = content.find(sep);
      std::string generated = content.substr(0, pos);
      size_t head = generated.find('\n');
      generated = head == std::string::npos ? "" : generated.substr(head + 1);
      std::string truth = pos == std::string::npos ? "" : content.substr(pos + sep.size());
      if (generated == truth)
        return "Structure Correctness: The generated tree matches the ground truth hierarchy "
               "exactly.\nScore: 3\n"
               "Similarity: The content is identical.\nScore: 3\n"
               "Overall Functionality Assessment: All interactive elements behave equivalently.\n"
               "Score: 3";
      return "Structure Correctness: The hierarchy only partially matches.\nScore: 1\n"
             "Similarity: Much of the content differs from the ground truth.\nScore: 1\n"
             "Overall Functionality Assessment: Key interactive elements are missing.\nScore: 1";
    }

    // Trajectory evaluation.
    std::string instruction = first_line_value(content, "Web Task Instruction: ");
    if (instruction.find("basketball") != std::string::npos) {
      if (content.find("Lakers") != std::string::npos)
        return "The task asked for yesterday's basketball score and the final page shows a "
               "final score that the response repeats. SUCCESS";
      return "No basketball score appears anywhere in the outcome. NOT SUCCESS";
    }
    if (instruction.find("red lamp") != std::string::npos) {
      if (content.find("$30") != std::string::npos)
        return "The lighting page lists the red lamp at $30.00 and the response reports it. "
               "SUCCESS";
      return "The price of the red lamp was never found. NOT SUCCESS";
    }
    return "The outcome does not demonstrate task completion. NOT SUCCESS";
  });
}

}  // namespace webtwin::demo
