#include "webtwin/axtree.hpp"

#include <random>

#include "doctest.h"

using namespace webtwin::axtree;

namespace {

// The accessibility-tree example shown in the generator's format primer.
const char* kGoogleTree =
    "Tab 0 (current): Google\n"
    "\n"
    "[1] RootWebArea 'Google' focused: true\n"
    "\t[2] link 'Gmail '\n"
    "\t[3] link 'Search Image '\n"
    "\t[4] button 'Google Apps' expanded: false\n"
    "\t[5] link 'Log in'\n"
    "\t[6] image '2024'\n"
    "\t[7] combobox 'Search' focused: true autocomplete: both hasPopup: listbox required: false "
    "expanded: false\n"
    "\t[8] button 'Share'";

}  // namespace

TEST_CASE("parse_axtree handles the reference tree") {
  AxTree tree = parse_axtree(kGoogleTree);
  REQUIRE(tree.roots.size() == 1);
  const AxNode& root = tree.roots[0];
  CHECK(root.id == 1);
  CHECK(root.role == "RootWebArea");
  CHECK(root.name == "Google");
  REQUIRE(root.attributes.size() == 1);
  CHECK(root.attributes[0].first == "focused");
  CHECK(root.attributes[0].second == "true");
  REQUIRE(root.children.size() == 7);

  CHECK(root.children[0].id == 2);
  CHECK(root.children[0].role == "link");
  CHECK(root.children[0].name == "Gmail ");  // trailing space preserved

  const AxNode* combobox = find_node(tree, 7);
  REQUIRE(combobox != nullptr);
  CHECK(combobox->role == "combobox");
  CHECK(combobox->name == "Search");
  CHECK(combobox->attributes.size() == 5);
  CHECK(combobox->depth == 1);
}

TEST_CASE("parse_axtree minimal tree") {
  AxTree tree = parse_axtree("Tab 0 (current): X\n\n[1] RootWebArea 'X'");
  REQUIRE(tree.roots.size() == 1);
  CHECK(tree.roots[0].attributes.empty());
  CHECK(tree.tab_header() == "Tab 0 (current): X");
}

TEST_CASE("parse_axtree duplicate id carries the line number") {
  try {
    parse_axtree("Tab 0 (current): X\n\n[1] RootWebArea 'X'\n\t[1] link 'Y'");
    FAIL("expected DuplicateId");
  } catch (const AxParseError& e) {
    CHECK(e.kind() == AxErrorKind::DuplicateId);
    CHECK(e.line() == 4);
  }
}

TEST_CASE("parse_axtree error taxonomy") {
  CHECK_THROWS_AS(parse_axtree("no header here"), AxParseError);
  try {
    parse_axtree("[1] RootWebArea 'X'");
    FAIL("expected MalformedHeader");
  } catch (const AxParseError& e) {
    CHECK(e.kind() == AxErrorKind::MalformedHeader);
  }
  try {
    parse_axtree("Tab 0: X\n\n[1] RootWebArea 'X'\n\t\t[2] link 'Y'");
    FAIL("expected BadIndent");
  } catch (const AxParseError& e) {
    CHECK(e.kind() == AxErrorKind::BadIndent);
    CHECK(e.line() == 4);
  }
  try {
    parse_axtree("Tab 0: X\n\n[1] RootWebArea 'X'\n  [2] link 'Y'");
    FAIL("expected BadIndent for space indentation");
  } catch (const AxParseError& e) {
    CHECK(e.kind() == AxErrorKind::BadIndent);
  }
  try {
    parse_axtree("Tab 0: X\n\nnot a node");
    FAIL("expected UnparsableNode");
  } catch (const AxParseError& e) {
    CHECK(e.kind() == AxErrorKind::UnparsableNode);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("serialize round-trips the reference tree byte for byte") {
  AxTree tree = parse_axtree(kGoogleTree);
  CHECK(serialize_axtree(tree) == kGoogleTree);
}

TEST_CASE("serialize with empty roots emits the header only") {
  AxTree tree;
  tree.tab_headers.push_back("Tab 0 (current): Empty");
  CHECK(serialize_axtree(tree) == "Tab 0 (current): Empty");
}

TEST_CASE("serialize matches an independent line formatter on a nested tree") {
  // Hand-built 5-node tree, three levels deep.
  AxNode grandchild{4, "statictext", "leaf", {}, 2, {}};
  AxNode child1{2, "list", "items", {{"expanded", "true"}}, 1, {grandchild}};
  AxNode child2{5, "button", "Go", {}, 1, {}};
  AxNode root{1, "RootWebArea", "Demo", {{"focused", "true"}}, 0, {child1, child2}};
  AxTree tree;
  tree.tab_headers.push_back("Tab 0 (current): Demo");
  tree.roots.push_back(root);

  // Independent oracle: flatten and format each node as
  // tabs + [id] + role + quoted name + attributes.
  struct Flat {
    const AxNode* node;
    int depth;
  };
  std::vector<Flat> order{{&root, 0}, {&child1, 1}, {&grandchild, 2}, {&child2, 1}};
  std::string expected = "Tab 0 (current): Demo\n";
  for (const Flat& f : order) {
    expected += "\n";
    for (int i = 0; i < f.depth; ++i) expected += "\t";
    expected += "[" + std::to_string(f.node->id) + "] " + f.node->role + " '" + f.node->name + "'";
    for (const auto& [k, v] : f.node->attributes) expected += " " + k + ": " + v;
  }

  CHECK(serialize_axtree(tree) == expected);
  // And the output re-parses to an equal structure.
  AxTree reparsed = parse_axtree(serialize_axtree(tree));
  CHECK(serialize_axtree(reparsed) == serialize_axtree(tree));
}

TEST_CASE("name escaping survives the round trip") {
  AxNode root{1, "RootWebArea", "It's a 'quoted' name \\ with backslash", {}, 0, {}};
  AxTree tree;
  tree.tab_headers.push_back("Tab 0 (current): Q");
  tree.roots.push_back(root);
  std::string wire = serialize_axtree(tree);
  AxTree reparsed = parse_axtree(wire);
  CHECK(reparsed.roots[0].name == root.name);
  CHECK(serialize_axtree(reparsed) == wire);
}

TEST_CASE("validate_structure") {
  CHECK(validate_structure(kGoogleTree).valid);
  CHECK(validate_structure(kGoogleTree).violations.empty());

  StructuralReport dup =
      validate_structure("Tab 0: X\n\n[1] RootWebArea 'X'\n\t[1] link 'Y'");
  CHECK_FALSE(dup.valid);
  REQUIRE(dup.violations.size() == 1);
  CHECK(dup.violations[0].kind == ViolationKind::DuplicateId);

  StructuralReport headerless = validate_structure("[1] RootWebArea 'X'");
  CHECK_FALSE(headerless.valid);
  REQUIRE(headerless.violations.size() == 1);
  CHECK(headerless.violations[0].kind == ViolationKind::MalformedHeader);

  StructuralReport two_roots =
      validate_structure("Tab 0: X\n\n[1] RootWebArea 'X'\n[2] RootWebArea 'Y'");
  CHECK_FALSE(two_roots.valid);
  CHECK(two_roots.violations[0].kind == ViolationKind::NotSingleRootWebArea);

  StructuralReport no_web_area = validate_structure("Tab 0: X\n\n[1] main 'X'");
  CHECK_FALSE(no_web_area.valid);
}

TEST_CASE("find_node agrees with an exhaustive scan on random trees") {
  std::mt19937 rng(20240817);
  for (int round = 0; round < 40; ++round) {
    int node_count = 1 + static_cast<int>(rng() % 50);
    std::string wire = "Tab 0 (current): R\n\n[1] RootWebArea 'root'";
    std::vector<int> depths{0};
    for (int id = 2; id <= node_count; ++id) {
      int max_depth = depths.back() + 1;
      int depth = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_depth));
      depths.push_back(depth);
      wire += "\n" + std::string(static_cast<size_t>(depth), '\t') + "[" + std::to_string(id) +
              "] link 'n" + std::to_string(id) + "'";
    }
    AxTree tree = parse_axtree(wire);

    // Oracle: ids present are exactly 1..node_count (by construction).
    for (int id = 1; id <= node_count + 5; ++id) {
      const AxNode* found = find_node(tree, id);
      if (id <= node_count) {
        REQUIRE(found != nullptr);
        CHECK(found->id == id);
      } else {
        CHECK(found == nullptr);
      }
    }
  }
}

TEST_CASE("parse failures never escape as non-typed errors") {
  std::mt19937 rng(99);
  for (int i = 0; i < 2000; ++i) {
    size_t len = rng() % 120;
    std::string input;
    for (size_t j = 0; j < len; ++j) input += static_cast<char>(rng() % 256);
    try {
      parse_axtree(input);
    } catch (const AxParseError&) {
      // expected shape of failure
    }
    StructuralReport report = validate_structure(input);  // must not throw
    (void)report;
  }
}
