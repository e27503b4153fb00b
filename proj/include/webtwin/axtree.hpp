#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace webtwin::axtree {

// One node of the accessibility tree. `depth` equals the number of leading
// tab characters on the node's wire line.
struct AxNode {
  int id = 0;
  std::string role;
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  int depth = 0;
  std::vector<AxNode> children;
};

struct AxTree {
  std::vector<std::string> tab_headers;  // at least one; we only ever emit one
  std::vector<AxNode> roots;
  std::string url;  // carried alongside the tree, never parsed from headers

  const std::string& tab_header() const { return tab_headers.front(); }
};

enum class AxErrorKind {
  MalformedHeader,
  DuplicateId,
  BadIndent,
  UnparsableNode,
};

const char* to_string(AxErrorKind kind);

class AxParseError : public std::runtime_error {
 public:
  AxParseError(AxErrorKind kind, int line, const std::string& message);
  AxErrorKind kind() const { return kind_; }
  int line() const { return line_; }  // 1-based line in the wire text

 private:
  AxErrorKind kind_;
  int line_;
};

// Parses the tab-indented wire format:
//   Tab 0 (current): Title
//
//   [1] RootWebArea 'Title' focused: true
//   \t[2] link 'Gmail '
AxTree parse_axtree(std::string_view text);

// Inverse of parse_axtree; serialize(parse(s)) == s for canonical inputs.
std::string serialize_axtree(const AxTree& tree);

enum class ViolationKind {
  MalformedHeader,
  DuplicateId,
  BadIndent,
  UnparsableNode,
  NotSingleRootWebArea,
};

const char* to_string(ViolationKind kind);

struct StructuralViolation {
  ViolationKind kind;
  int line = 0;
  std::string detail;
};

struct StructuralReport {
  bool valid = false;
  std::vector<StructuralViolation> violations;
};

// Never throws; failures become report entries.
StructuralReport validate_structure(std::string_view text);

// Unique node with the given id, or nullptr.
const AxNode* find_node(const AxTree& tree, int id);

}  // namespace webtwin::axtree
