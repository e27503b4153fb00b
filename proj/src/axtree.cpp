#include "webtwin/axtree.hpp"

#include <set>

#include "webtwin/util.hpp"

namespace webtwin::axtree {

using util::split_lines;
using util::starts_with;

const char* to_string(AxErrorKind kind) {
  switch (kind) {
    case AxErrorKind::MalformedHeader: return "MalformedHeader";
    case AxErrorKind::DuplicateId: return "DuplicateId";
    case AxErrorKind::BadIndent: return "BadIndent";
    case AxErrorKind::UnparsableNode: return "UnparsableNode";
  }
  return "?";
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::MalformedHeader: return "MalformedHeader";
    case ViolationKind::DuplicateId: return "DuplicateId";
    case ViolationKind::BadIndent: return "BadIndent";
    case ViolationKind::UnparsableNode: return "UnparsableNode";
    case ViolationKind::NotSingleRootWebArea: return "NotSingleRootWebArea";
  }
  return "?";
}

AxParseError::AxParseError(AxErrorKind kind, int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + to_string(kind) +
                         ": " + message),
      kind_(kind),
      line_(line) {}

namespace {

// Parses `[id] role 'name'( key: value)*` after the leading tabs were removed.
// `line_no` is for error reporting only.
AxNode parse_node_line(std::string_view body, int depth, int line_no) {
  AxNode node;
  node.depth = depth;

  if (body.empty() || body[0] != '[')
    throw AxParseError(AxErrorKind::UnparsableNode, line_no, "expected '[id]'");
  size_t pos = 1;
  long id = 0;
  size_t digits = 0;
  while (pos < body.size() && body[pos] >= '0' && body[pos] <= '9') {
    id = id * 10 + (body[pos] - '0');
    if (id > 1000000000L)
      throw AxParseError(AxErrorKind::UnparsableNode, line_no, "id out of range");
    ++pos;
    ++digits;
  }
  if (digits == 0 || pos >= body.size() || body[pos] != ']')
    throw AxParseError(AxErrorKind::UnparsableNode, line_no, "bad id bracket");
  if (id <= 0)
    throw AxParseError(AxErrorKind::UnparsableNode, line_no, "id must be positive");
  node.id = static_cast<int>(id);
  ++pos;

  if (pos >= body.size() || body[pos] != ' ')
    throw AxParseError(AxErrorKind::UnparsableNode, line_no, "expected space after id");
  ++pos;

  size_t role_start = pos;
  while (pos < body.size() && body[pos] != ' ') ++pos;
  node.role = std::string(body.substr(role_start, pos - role_start));
  if (node.role.empty())
    throw AxParseError(AxErrorKind::UnparsableNode, line_no, "empty role");

  if (pos >= body.size() || body[pos] != ' ')
    throw AxParseError(AxErrorKind::UnparsableNode, line_no, "expected quoted name");
  ++pos;
  if (pos >= body.size() || body[pos] != '\'')
    throw AxParseError(AxErrorKind::UnparsableNode, line_no, "expected quoted name");
  ++pos;

  std::string name;
  bool closed = false;
  while (pos < body.size()) {
    char c = body[pos];
    if (c == '\\' && pos + 1 < body.size()) {
      name += body[pos + 1];
      pos += 2;
      continue;
    }
    if (c == '\'') {
      closed = true;
      ++pos;
      break;
    }
    name += c;
    ++pos;
  }
  if (!closed)
    throw AxParseError(AxErrorKind::UnparsableNode, line_no, "unterminated name quote");
  node.name = std::move(name);

  // Attributes: space-separated `key: value` pairs until end of line.
  while (pos < body.size()) {
    if (body[pos] != ' ')
      throw AxParseError(AxErrorKind::UnparsableNode, line_no, "junk after name");
    ++pos;
    size_t key_start = pos;
    while (pos < body.size() && body[pos] != ' ') ++pos;
    std::string_view key = body.substr(key_start, pos - key_start);
    if (key.size() < 2 || key.back() != ':')
      throw AxParseError(AxErrorKind::UnparsableNode, line_no, "expected 'key:' token");
    if (pos >= body.size() || body[pos] != ' ')
      throw AxParseError(AxErrorKind::UnparsableNode, line_no, "attribute missing value");
    ++pos;
    size_t val_start = pos;
    while (pos < body.size() && body[pos] != ' ') ++pos;
    std::string_view value = body.substr(val_start, pos - val_start);
    if (value.empty())
      throw AxParseError(AxErrorKind::UnparsableNode, line_no, "attribute missing value");
    node.attributes.emplace_back(std::string(key.substr(0, key.size() - 1)),
                                 std::string(value));
  }
  return node;
}

void serialize_node(const AxNode& node, int depth, std::string& out) {
  out += '\n';
  out.append(static_cast<size_t>(depth), '\t');
  out += '[';
  out += std::to_string(node.id);
  out += "] ";
  out += node.role;
  out += " '";
  for (char c : node.name) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  out += '\'';
  for (const auto& [key, value] : node.attributes) {
    out += ' ';
    out += key;
    out += ": ";
    out += value;
  }
  for (const AxNode& child : node.children) serialize_node(child, depth + 1, out);
}

void collect_ids(const AxNode& node, std::vector<int>& out) {
  out.push_back(node.id);
  for (const AxNode& child : node.children) collect_ids(child, out);
}

}  // namespace

AxTree parse_axtree(std::string_view text) {
  AxTree tree;
  std::vector<std::string_view> lines = split_lines(text);

  size_t i = 0;
  while (i < lines.size() && starts_with(lines[i], "Tab ")) {
    tree.tab_headers.emplace_back(lines[i]);
    ++i;
  }
  if (tree.tab_headers.empty())
    throw AxParseError(AxErrorKind::MalformedHeader, 1, "expected a 'Tab ...' header line");

  std::set<int> seen_ids;
  // Stack of pointers to the most recent node at each depth.
  std::vector<AxNode*> stack;

  for (; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    int line_no = static_cast<int>(i) + 1;
    if (util::trim(line).empty()) continue;

    size_t tabs = 0;
    while (tabs < line.size() && line[tabs] == '\t') ++tabs;
    std::string_view body = line.substr(tabs);
    if (!body.empty() && body[0] == ' ')
      throw AxParseError(AxErrorKind::BadIndent, line_no,
                         "leading spaces are not valid indentation");
    int depth = static_cast<int>(tabs);

    if (depth > static_cast<int>(stack.size()))
      throw AxParseError(AxErrorKind::BadIndent, line_no,
                         "indent skips a level (depth " + std::to_string(depth) + ")");

    AxNode node = parse_node_line(body, depth, line_no);
    if (!seen_ids.insert(node.id).second)
      throw AxParseError(AxErrorKind::DuplicateId, line_no,
                         "id " + std::to_string(node.id) + " already used");

    stack.resize(static_cast<size_t>(depth));
    AxNode* placed;
    if (depth == 0) {
      tree.roots.push_back(std::move(node));
      placed = &tree.roots.back();
    } else {
      AxNode* parent = stack.back();
      parent->children.push_back(std::move(node));
      placed = &parent->children.back();
    }
    stack.push_back(placed);
  }
  return tree;
}

std::string serialize_axtree(const AxTree& tree) {
  std::string out;
  for (size_t i = 0; i < tree.tab_headers.size(); ++i) {
    if (i) out += '\n';
    out += tree.tab_headers[i];
  }
  if (tree.tab_headers.empty()) out += "Tab 0 (current): (untitled)";
  if (!tree.roots.empty()) out += '\n';
  for (const AxNode& root : tree.roots) serialize_node(root, 0, out);
  return out;
}

StructuralReport validate_structure(std::string_view text) {
  StructuralReport report;
  AxTree tree;
  try {
    tree = parse_axtree(text);
  } catch (const AxParseError& e) {
    ViolationKind kind;
    switch (e.kind()) {
      case AxErrorKind::MalformedHeader: kind = ViolationKind::MalformedHeader; break;
      case AxErrorKind::DuplicateId: kind = ViolationKind::DuplicateId; break;
      case AxErrorKind::BadIndent: kind = ViolationKind::BadIndent; break;
      default: kind = ViolationKind::UnparsableNode; break;
    }
    report.violations.push_back({kind, e.line(), e.what()});
    report.valid = false;
    return report;
  }

  int root_web_areas = 0;
  for (const AxNode& root : tree.roots)
    if (root.role == "RootWebArea") ++root_web_areas;
  if (root_web_areas != 1)
    report.violations.push_back(
        {ViolationKind::NotSingleRootWebArea, 0,
         "expected exactly one RootWebArea root, found " + std::to_string(root_web_areas)});

  report.valid = report.violations.empty();
  return report;
}

const AxNode* find_node(const AxTree& tree, int id) {
  std::vector<const AxNode*> stack;
  for (const AxNode& root : tree.roots) stack.push_back(&root);
  while (!stack.empty()) {
    const AxNode* node = stack.back();
    stack.pop_back();
    if (node->id == id) return node;
    for (const AxNode& child : node->children) stack.push_back(&child);
  }
  return nullptr;
}

}  // namespace webtwin::axtree
