#include "webtwin/simweb.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "json.hpp"
#include "webtwin/axtree.hpp"
#include "webtwin/util.hpp"

namespace webtwin::simweb {

using nlohmann::json;
using util::split_lines;
using util::trim;

const char* to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::Stopped: return "stopped";
    case TerminationReason::StepLimit: return "step_limit";
    case TerminationReason::EnvError: return "env_error";
  }
  return "?";
}

EnvError::EnvError(EnvErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

const Page* SiteSpec::page(const std::string& page_id) const {
  for (const Page& p : pages)
    if (p.id == page_id) return &p;
  return nullptr;
}

// ---------------------------------------------------------------------------
// site.toml loading. A small subset of TOML carries the manifest: top-level
// key = value pairs, [pages.NAME] tables and [[edges]] array-of-tables, with
// string / integer / boolean values.

namespace {

struct TomlValue {
  enum class Kind { String, Integer, Boolean } kind;
  std::string str;
  long integer = 0;
  bool boolean = false;
};

TomlValue parse_toml_value(std::string_view raw, const std::string& where) {
  std::string_view v = trim(raw);
  if (v.empty()) throw SiteError("missing value " + where);
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw SiteError("unterminated string " + where);
    std::string out;
    for (size_t i = 1; i + 1 < v.size(); ++i) {
      char c = v[i];
      if (c == '\\' && i + 2 < v.size()) {
        char n = v[i + 1];
        if (n == 'n') out += '\n';
        else if (n == 't') out += '\t';
        else out += n;
        ++i;
        continue;
      }
      out += c;
    }
    return {TomlValue::Kind::String, out, 0, false};
  }
  if (v == "true" || v == "false")
    return {TomlValue::Kind::Boolean, "", 0, v == "true"};
  bool neg = v.front() == '-';
  std::string_view digits = neg ? v.substr(1) : v;
  if (digits.empty()) throw SiteError("bad value " + where);
  long n = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') throw SiteError("bad value '" + std::string(v) + "' " + where);
    n = n * 10 + (c - '0');
  }
  return {TomlValue::Kind::Integer, "", neg ? -n : n, false};
}

std::string need_string(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::String) throw SiteError("expected string " + where);
  return v.str;
}

long need_integer(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::Integer) throw SiteError("expected integer " + where);
  return v.integer;
}

}  // namespace

SiteSpec load_site(const std::filesystem::path& dir) {
  SiteSpec spec;
  spec.id = dir.filename().string();

  std::filesystem::path manifest = dir / "site.toml";
  std::string text = util::read_file(manifest.string());

  enum class Section { Top, Page, Edge };
  Section section = Section::Top;
  Page* page = nullptr;
  Edge* edge = nullptr;

  std::vector<std::string_view> lines = split_lines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string where = "at " + manifest.string() + ":" + std::to_string(i + 1);
    std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;

    if (line == "[[edges]]") {
      spec.edges.emplace_back();
      edge = &spec.edges.back();
      section = Section::Edge;
      continue;
    }
    if (util::starts_with(line, "[pages.") && line.back() == ']') {
      std::string name(line.substr(7, line.size() - 8));
      if (name.empty()) throw SiteError("empty page name " + where);
      spec.pages.emplace_back();
      page = &spec.pages.back();
      page->id = name;
      section = Section::Page;
      continue;
    }
    if (line.front() == '[') throw SiteError("unknown table " + std::string(line) + " " + where);

    size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw SiteError("expected key = value " + where);
    std::string key(trim(line.substr(0, eq)));
    TomlValue value = parse_toml_value(line.substr(eq + 1), where);

    switch (section) {
      case Section::Top:
        if (key == "start_page") spec.start_page = need_string(value, where);
        else if (key == "homepage") spec.homepage = need_string(value, where);
        else if (key == "window_lines") spec.window_lines = static_cast<int>(need_integer(value, where));
        else throw SiteError("unknown key '" + key + "' " + where);
        break;
      case Section::Page:
        if (key == "url") page->url = need_string(value, where);
        else if (key == "axtree") page->axtree_file = need_string(value, where);
        else throw SiteError("unknown page key '" + key + "' " + where);
        break;
      case Section::Edge:
        if (key == "from") edge->from = need_string(value, where);
        else if (key == "to") edge->to = need_string(value, where);
        else if (key == "verb") edge->match.verb = need_string(value, where);
        else if (key == "target") edge->match.target_id = static_cast<int>(need_integer(value, where));
        else if (key == "content") edge->match.content_pattern = need_string(value, where);
        else throw SiteError("unknown edge key '" + key + "' " + where);
        break;
    }
  }

  if (spec.start_page.empty()) throw SiteError("site.toml missing start_page: " + manifest.string());
  if (spec.homepage.empty()) throw SiteError("site.toml missing homepage: " + manifest.string());
  if (spec.window_lines < 3) throw SiteError("window_lines too small: " + manifest.string());

  for (Page& p : spec.pages) {
    if (p.axtree_file.empty()) throw SiteError("page " + p.id + " missing axtree file");
    p.axtree_text = util::read_file((dir / p.axtree_file).string());
    // Normalize a single trailing newline away so views match serialize output.
    if (!p.axtree_text.empty() && p.axtree_text.back() == '\n') p.axtree_text.pop_back();
    axtree::StructuralReport report = axtree::validate_structure(p.axtree_text);
    if (!report.valid)
      throw SiteError("page " + p.id + " has an invalid axtree (" + p.axtree_file + "): " +
                      report.violations.front().detail);
  }
  return spec;
}

std::map<std::string, SiteSpec> load_sites(const std::filesystem::path& dir) {
  std::map<std::string, SiteSpec> out;
  if (!std::filesystem::is_directory(dir)) throw SiteError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> sites;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "site.toml"))
      sites.push_back(entry.path());
  std::sort(sites.begin(), sites.end());
  for (const auto& site : sites) out.emplace(site.filename().string(), load_site(site));
  if (out.empty()) throw SiteError("no site.toml found under " + dir.string());
  return out;
}

bool ValidationReport::ok() const {
  for (const ValidationEntry& e : entries)
    if (e.level == ValidationEntry::Level::Error) return false;
  return true;
}

ValidationReport validate_spec(const SiteSpec& spec) {
  ValidationReport report;
  auto error = [&report](const std::string& m) {
    report.entries.push_back({ValidationEntry::Level::Error, m});
  };
  auto warning = [&report](const std::string& m) {
    report.entries.push_back({ValidationEntry::Level::Warning, m});
  };

  std::set<std::string> ids;
  for (const Page& p : spec.pages) {
    if (!ids.insert(p.id).second) error("duplicate page id: " + p.id);
    axtree::StructuralReport r = axtree::validate_structure(p.axtree_text);
    if (!r.valid) error("page " + p.id + ": invalid axtree");
  }
  if (!spec.page(spec.start_page)) error("start_page does not exist: " + spec.start_page);
  if (!spec.page(spec.homepage)) error("homepage does not exist: " + spec.homepage);

  for (size_t i = 0; i < spec.edges.size(); ++i) {
    const Edge& e = spec.edges[i];
    std::string where = "edge #" + std::to_string(i + 1);
    if (!spec.page(e.from)) error(where + ": unknown source page " + e.from);
    if (!spec.page(e.to)) error(where + ": unknown target page " + e.to);
    if (e.match.verb != "click" && e.match.verb != "type")
      error(where + ": matcher verb must be click or type, got " + e.match.verb);
    if (e.match.target_id <= 0) error(where + ": matcher target must be positive");
    if (e.match.content_pattern) {
      try {
        std::regex re(*e.match.content_pattern);
      } catch (const std::regex_error&) {
        error(where + ": bad content regex " + *e.match.content_pattern);
      }
    }
    // The matched element should exist on the source page.
    if (const Page* p = spec.page(e.from)) {
      try {
        axtree::AxTree tree = axtree::parse_axtree(p->axtree_text);
        if (!axtree::find_node(tree, e.match.target_id))
          warning(where + ": element [" + std::to_string(e.match.target_id) +
                  "] not present on page " + e.from);
      } catch (const axtree::AxParseError&) {
        // already reported above
      }
    }
  }

  // Reachability from the start page over edges plus goback/restart targets.
  std::set<std::string> reachable;
  std::vector<std::string> frontier{spec.start_page, spec.homepage};
  while (!frontier.empty()) {
    std::string page_id = frontier.back();
    frontier.pop_back();
    if (!reachable.insert(page_id).second) continue;
    for (const Edge& e : spec.edges)
      if (e.from == page_id) frontier.push_back(e.to);
  }
  for (const Page& p : spec.pages)
    if (!reachable.count(p.id)) warning("page " + p.id + " is unreachable from the start page");

  return report;
}

std::vector<TaskSpec> load_tasks(const std::filesystem::path& jsonl_file) {
  std::string text = util::read_file(jsonl_file.string());
  std::vector<TaskSpec> tasks;
  int line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    std::string where = jsonl_file.string() + ":" + std::to_string(line_no);
    if (record.is_discarded()) throw SiteError("bad task JSON at " + where);
    TaskSpec task;
    task.id = record.value("id", "");
    task.site = record.value("site", "");
    task.query = record.value("query", "");
    task.start_page = record.value("start_page", "");
    task.tag = record.value("tag", task.site);
    if (task.id.empty() || task.site.empty() || task.query.empty() || task.start_page.empty())
      throw SiteError("task missing id/site/query/start_page at " + where);
    if (!record.contains("goal")) throw SiteError("task missing goal at " + where);
    const json& goal = record["goal"];
    std::string kind = goal.value("kind", "");
    if (kind == "reach_page") {
      task.goal.kind = GoalSpec::Kind::ReachPage;
      task.goal.page = goal.value("page", "");
      if (task.goal.page.empty()) throw SiteError("reach_page goal missing page at " + where);
    } else if (kind == "stop_answer_matches") {
      task.goal.kind = GoalSpec::Kind::StopAnswerMatches;
      task.goal.pattern = goal.value("pattern", "");
      try {
        std::regex re(task.goal.pattern);
      } catch (const std::regex_error&) {
        throw SiteError("bad goal regex at " + where);
      }
    } else if (kind == "visited_all") {
      task.goal.kind = GoalSpec::Kind::VisitedAll;
      for (const auto& p : goal.value("pages", json::array()))
        task.goal.pages.push_back(p.get<std::string>());
      if (task.goal.pages.empty()) throw SiteError("visited_all goal missing pages at " + where);
    } else {
      throw SiteError("unknown goal kind '" + kind + "' at " + where);
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// Windowed page views.

int node_line_count(const std::string& full_text) {
  int count = 0;
  for (std::string_view line : split_lines(full_text)) {
    if (util::starts_with(line, "Tab ")) continue;
    if (trim(line).empty()) continue;
    ++count;
  }
  return count;
}

std::string render_view(const std::string& full_text, int offset, int budget) {
  std::vector<std::string_view> header_lines;
  std::vector<std::string_view> node_lines;
  for (std::string_view line : split_lines(full_text)) {
    if (util::starts_with(line, "Tab ")) {
      header_lines.push_back(line);
      continue;
    }
    if (trim(line).empty()) continue;
    node_lines.push_back(line);
  }
  int total = static_cast<int>(node_lines.size());
  if (total <= budget && offset == 0) return full_text;

  offset = std::clamp(offset, 0, std::max(0, total - budget));
  int end = std::min(total, offset + budget);

  auto depth_of = [](std::string_view line) {
    int d = 0;
    while (d < static_cast<int>(line.size()) && line[d] == '\t') ++d;
    return d;
  };

  // Ancestor chain of the first visible line keeps the view a valid tree.
  std::vector<std::string_view> ancestors;
  int want = depth_of(node_lines[static_cast<size_t>(offset)]) - 1;
  for (int i = offset - 1; i >= 0 && want >= 0; --i) {
    int d = depth_of(node_lines[static_cast<size_t>(i)]);
    if (d == want) {
      ancestors.push_back(node_lines[static_cast<size_t>(i)]);
      --want;
    }
  }
  std::reverse(ancestors.begin(), ancestors.end());

  std::string out;
  for (size_t i = 0; i < header_lines.size(); ++i) {
    if (i) out += '\n';
    out += header_lines[i];
  }
  out += '\n';
  for (std::string_view line : ancestors) {
    out += '\n';
    out += line;
  }
  for (int i = offset; i < end; ++i) {
    out += '\n';
    out += node_lines[static_cast<size_t>(i)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// EnvSession.

EnvSession::EnvSession(const SiteSpec& spec, const std::string& start_page, int step_limit)
    : spec_(spec), step_limit_(step_limit) {
  if (!spec_.page(start_page))
    throw EnvError(EnvErrorKind::UnknownPage, "unknown start page: " + start_page);
  current_ = start_page;
  visited_.push_back(current_);
}

Observation EnvSession::observe(std::optional<std::string> feedback) const {
  const Page* page = spec_.page(current_);
  Observation obs;
  obs.url = page->url;
  obs.axtree = render_view(page->axtree_text, scroll_offset_, spec_.window_lines);
  obs.error_feedback = std::move(feedback);
  return obs;
}

void EnvSession::goto_page(const std::string& page_id) {
  current_ = page_id;
  scroll_offset_ = 0;
  if (std::find(visited_.begin(), visited_.end(), page_id) == visited_.end())
    visited_.push_back(page_id);
}

StepOutcome EnvSession::reset() {
  StepOutcome outcome;
  outcome.observation = observe(std::nullopt);
  return outcome;
}

StepOutcome EnvSession::step(const actions::Action& action) {
  if (terminated_)
    throw EnvError(EnvErrorKind::SessionTerminated, "session already terminated");

  std::optional<std::string> feedback;

  struct Visitor {
    EnvSession& env;
    std::optional<std::string>& feedback;

    void take_edge(const std::string& to) {
      env.history_.emplace_back(env.current_, env.scroll_offset_);
      env.goto_page(to);
    }

    void no_effect(int id) {
      feedback = "no effect: element [" + std::to_string(id) + "] not actionable";
    }

    void operator()(const actions::Click& click) {
      for (const Edge& e : env.spec_.edges) {
        if (e.from != env.current_) continue;
        if (e.match.verb != "click" || e.match.target_id != click.id) continue;
        take_edge(e.to);
        return;
      }
      no_effect(click.id);
    }

    void operator()(const actions::TypeText& type) {
      for (const Edge& e : env.spec_.edges) {
        if (e.from != env.current_) continue;
        if (e.match.verb != "type" || e.match.target_id != type.id) continue;
        if (e.match.content_pattern) {
          std::regex re(*e.match.content_pattern);
          if (!std::regex_search(type.content, re)) continue;
        }
        take_edge(e.to);
        return;
      }
      no_effect(type.id);
    }

    void operator()(const actions::Scroll& scroll) {
      const Page* page = env.spec_.page(env.current_);
      int total = node_line_count(page->axtree_text);
      int max_offset = std::max(0, total - env.spec_.window_lines);
      int delta = env.spec_.window_lines / 2;
      int next = scroll.direction == actions::ScrollDirection::Down
                     ? std::min(env.scroll_offset_ + delta, max_offset)
                     : std::max(env.scroll_offset_ - delta, 0);
      if (next == env.scroll_offset_) {
        feedback = scroll.direction == actions::ScrollDirection::Down
                       ? "no effect: already at the bottom of the page"
                       : "no effect: already at the top of the page";
        return;
      }
      env.scroll_offset_ = next;
    }

    void operator()(const actions::GoBack&) {
      if (env.history_.empty()) {
        feedback = "no effect: no previous page to go back to";
        return;
      }
      auto [page, offset] = env.history_.back();
      env.history_.pop_back();
      env.goto_page(page);
      env.scroll_offset_ = offset;
    }

    void operator()(const actions::Restart&) {
      env.history_.clear();
      env.goto_page(env.spec_.homepage);
    }

    void operator()(const actions::Wait&) {}

    void operator()(const actions::Stop& stop) { env.stop_answer_ = stop.answer; }
  };

  std::visit(Visitor{*this, feedback}, action);
  ++step_count_;

  StepOutcome outcome;
  if (std::holds_alternative<actions::Stop>(action)) {
    terminated_ = true;
    reason_ = TerminationReason::Stopped;
  } else if (step_count_ >= step_limit_) {
    terminated_ = true;
    reason_ = TerminationReason::StepLimit;
  }

  outcome.observation = observe(std::move(feedback));
  outcome.terminated = terminated_;
  outcome.termination_reason = reason_;
  return outcome;
}

bool check_goal(const TaskSpec& task, const GoalEvidence& evidence) {
  switch (task.goal.kind) {
    case GoalSpec::Kind::ReachPage:
      return evidence.final_page == task.goal.page;
    case GoalSpec::Kind::StopAnswerMatches: {
      if (!evidence.stop_answer) return false;
      std::regex re(task.goal.pattern);
      return std::regex_search(*evidence.stop_answer, re);
    }
    case GoalSpec::Kind::VisitedAll:
      for (const std::string& page : task.goal.pages)
        if (std::find(evidence.visited.begin(), evidence.visited.end(), page) ==
            evidence.visited.end())
          return false;
      return true;
  }
  return false;
}

GoalEvidence replay_actions(const SiteSpec& spec, const std::string& start_page,
                            const std::vector<actions::Action>& actions_list) {
  EnvSession session(spec, start_page, static_cast<int>(actions_list.size()) + 1);
  for (const actions::Action& a : actions_list) {
    if (session.terminated()) break;
    session.step(a);
  }
  GoalEvidence evidence;
  evidence.final_page = session.current_page();
  evidence.stop_answer = session.stop_answer();
  evidence.visited = session.visited();
  return evidence;
}

}  // namespace webtwin::simweb
