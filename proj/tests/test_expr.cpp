#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "qcaforge/expr.hpp"

using namespace qcaforge;

namespace {

int ev(const ExprPtr& e, std::map<std::string, int> a) { return eval_oracle(e, a); }

// Exhaustive equivalence over the named inputs.
void check_equiv(const ExprPtr& a, const ExprPtr& b) {
  auto ins = collect_inputs(a);
  for (const auto& extra : collect_inputs(b)) {
    bool seen = false;
    for (const auto& i : ins) seen = seen || i == extra;
    if (!seen) ins.push_back(extra);
  }
  REQUIRE(ins.size() <= 16);
  for (unsigned v = 0; v < (1u << ins.size()); ++v) {
    std::map<std::string, int> asg;
    for (size_t i = 0; i < ins.size(); ++i)
      asg[ins[i]] = (v >> (ins.size() - 1 - i)) & 1;
    CHECK(eval_oracle(a, asg) == eval_oracle(b, asg));
  }
}

}  // namespace

TEST_CASE("expression circuit from the first worked example parses with OR root") {
  auto e = parse_expression("(In1 + In2)' + ((In1 + In2) * In3)",
                            {"In1", "In2", "In3"});
  REQUIRE(e->kind == ExprKind::Or);
  REQUIRE(e->children[0]->kind == ExprKind::Not);
  REQUIRE(e->children[0]->children[0]->kind == ExprKind::Or);
  CHECK(e->children[0]->children[0]->children[0]->input_name == "In1");
  CHECK(e->children[0]->children[0]->children[1]->input_name == "In2");
  REQUIRE(e->children[1]->kind == ExprKind::And);
  CHECK(e->children[1]->children[1]->input_name == "In3");
}

TEST_CASE("multiplication sign U+00D7 is AND") {
  auto a = parse_expression("(In1 + In2)' + ((In1 + In2) \xc3\x97In3)",
                            {"In1", "In2", "In3"});
  auto b = parse_expression("(In1 + In2)' + ((In1 + In2) * In3)",
                            {"In1", "In2", "In3"});
  CHECK(structurally_equal(a, b));
}

TEST_CASE("single identifier is an input ref") {
  auto e = parse_expression("A", {"A"});
  REQUIRE(e->kind == ExprKind::Input);
  CHECK(e->input_name == "A");
}

TEST_CASE("MAJ with const-0 third child") {
  auto e = parse_expression("MAJ(A,B,0)", {"A", "B"});
  REQUIRE(e->kind == ExprKind::Maj3);
  CHECK(e->children[2]->kind == ExprKind::Const);
  CHECK(e->children[2]->const_value == 0);
}

TEST_CASE("precedence: NOT over AND over OR") {
  auto e = parse_expression("a + b * c'", {"a", "b", "c"});
  REQUIRE(e->kind == ExprKind::Or);
  REQUIRE(e->children[1]->kind == ExprKind::And);
  CHECK(e->children[1]->children[1]->kind == ExprKind::Not);
}

TEST_CASE("eval oracle basics") {
  CHECK(ev(make_maj(make_const(1), make_const(1), make_const(0)), {}) == 1);
  CHECK(ev(make_not(make_const(0)), {}) == 1);
  CHECK(ev(make_maj(make_const(0), make_const(1), make_const(0)), {}) == 0);
}

TEST_CASE("second worked expression at In1=1 In2=0 In3=1 yields 0") {
  auto e = parse_expression("(In1' \xc3\x97 In2) + ((In3)' + (In2))",
                            {"In1", "In2", "In3"});
  CHECK(ev(e, {{"In1", 1}, {"In2", 0}, {"In3", 1}}) == 0);
  CHECK(ev(e, {{"In1", 0}, {"In2", 0}, {"In3", 0}}) == 1);
}

TEST_CASE("MAJ truth table: true iff at least two inputs true") {
  auto e = parse_expression("MAJ(a,b,c)", {"a", "b", "c"});
  for (int v = 0; v < 8; ++v) {
    int a = (v >> 2) & 1, b = (v >> 1) & 1, c = v & 1;
    CHECK(ev(e, {{"a", a}, {"b", b}, {"c", c}}) == ((a + b + c >= 2) ? 1 : 0));
  }
}

TEST_CASE("missing assignment raises") {
  auto e = parse_expression("a * b", {"a", "b"});
  CHECK_THROWS_AS(ev(e, {{"a", 1}}), QcaError);
}

TEST_CASE("syntax errors carry a position") {
  try {
    parse_expression("a + )", {"a"});
    FAIL("expected a parse error");
  } catch (const QcaError& err) {
    CHECK(err.stage == "parse");
    CHECK(err.position >= 0);
  }
  CHECK_THROWS_AS(parse_expression("a +", {"a"}), QcaError);
  CHECK_THROWS_AS(parse_expression("", {}), QcaError);
  CHECK_THROWS_AS(parse_expression("a * q", {"a"}), QcaError);
  CHECK_THROWS_AS(parse_expression("MAJ(a,b)", {"a", "b"}), QcaError);
}

TEST_CASE("XOR sugar expands to (a*b') + (a'*b)") {
  auto e = parse_expression("XOR(A,B)", {"A", "B"});
  auto expect = make_or(make_and(make_input("A"), make_not(make_input("B"))),
                        make_and(make_not(make_input("A")), make_input("B")));
  CHECK(structurally_equal(e, expect));
}

TEST_CASE("NAND and NOR sugar") {
  auto nand = parse_expression("NAND(a,b)", {"a", "b"});
  CHECK(structurally_equal(nand, make_not(make_and(make_input("a"), make_input("b")))));
  auto nor = parse_expression("NOR(a,b)", {"a", "b"});
  CHECK(structurally_equal(nor, make_not(make_or(make_input("a"), make_input("b")))));
}

TEST_CASE("numeric tokens prefer declared signals over literals") {
  auto e = parse_expression("NAND(1,3)", {"1", "2", "3"});
  REQUIRE(e->kind == ExprKind::Not);
  CHECK(e->children[0]->children[0]->kind == ExprKind::Input);
  CHECK(e->children[0]->children[0]->input_name == "1");
  // Undeclared "1" falls back to the constant.
  auto k = parse_expression("a * 1", {"a"});
  CHECK(k->children[1]->kind == ExprKind::Const);
}

TEST_CASE("decompose basic removes MAJ") {
  auto e = parse_expression("MAJ(a,b,c)", {"a", "b", "c"});
  auto d = decompose(e, DecomposeMode::Basic);
  std::function<void(const ExprPtr&)> no_maj = [&](const ExprPtr& n) {
    CHECK(n->kind != ExprKind::Maj3);
    for (auto& ch : n->children) no_maj(ch);
  };
  no_maj(d);
  check_equiv(e, d);
}

TEST_CASE("decompose majority rewrites AND and OR with program constants") {
  auto a = decompose(parse_expression("a * b", {"a", "b"}), DecomposeMode::Majority);
  REQUIRE(a->kind == ExprKind::Maj3);
  CHECK(a->children[2]->kind == ExprKind::Const);
  CHECK(a->children[2]->const_value == 0);

  auto o = decompose(parse_expression("a + b", {"a", "b"}), DecomposeMode::Majority);
  REQUIRE(o->kind == ExprKind::Maj3);
  CHECK(o->children[2]->const_value == 1);

  auto in = decompose(make_input("A"), DecomposeMode::Majority);
  CHECK(in->kind == ExprKind::Input);
}

TEST_CASE("decomposition preserves semantics on assorted expressions") {
  const char* samples[] = {
      "(In1 + In2)' + ((In1 + In2) * In3)",
      "MAJ(a, MAJ(b, c, 0), a')",
      "XOR(a, XOR(b, c))",
      "NAND(a, NOR(b, c)) + MAJ(a, b, c)'",
      "a * b * c + a' * b' * c' + MAJ(a, b, 1)",
  };
  for (const char* s : samples) {
    // Identify inputs by scanning through a circuit-free parse.
    std::vector<std::string> ids = {"a", "b", "c", "In1", "In2", "In3"};
    auto e = parse_expression(s, ids);
    check_equiv(e, decompose(e, DecomposeMode::Basic));
    check_equiv(e, decompose(e, DecomposeMode::Majority));
    check_equiv(decompose(e, DecomposeMode::Basic),
                decompose(e, DecomposeMode::Majority));
  }
}

TEST_CASE("to_string round-trips through the parser") {
  const char* samples[] = {
      "(In1 + In2)' + ((In1 + In2) * In3)",
      "MAJ(a, b, c)' * (a + b')",
      "a * (b + c)'",
  };
  for (const char* s : samples) {
    std::vector<std::string> ids = {"a", "b", "c", "In1", "In2", "In3"};
    auto e = parse_expression(s, ids);
    auto round = parse_expression(to_string(e), ids);
    CHECK(structurally_equal(e, round));
  }
}

TEST_CASE("collect_inputs preserves first-use order") {
  auto e = parse_expression("c' + a * (b + c)", {"a", "b", "c"});
  auto ins = collect_inputs(e);
  REQUIRE(ins.size() == 3);
  CHECK(ins[0] == "c");
  CHECK(ins[1] == "a");
  CHECK(ins[2] == "b");
}
