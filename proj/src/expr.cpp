#include "qcaforge/expr.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace qcaforge {

namespace {

ExprPtr node(ExprKind kind, std::vector<ExprPtr> children) {
  auto n = std::make_shared<BoolExpr>();
  n->kind = kind;
  n->children = std::move(children);
  return n;
}

}  // namespace

ExprPtr make_input(const std::string& name) {
  auto n = std::make_shared<BoolExpr>();
  n->kind = ExprKind::Input;
  n->input_name = name;
  return n;
}

ExprPtr make_const(int value) {
  auto n = std::make_shared<BoolExpr>();
  n->kind = ExprKind::Const;
  n->const_value = value ? 1 : 0;
  return n;
}

ExprPtr make_not(ExprPtr a) { return node(ExprKind::Not, {std::move(a)}); }

ExprPtr make_and(ExprPtr a, ExprPtr b) {
  return node(ExprKind::And, {std::move(a), std::move(b)});
}

ExprPtr make_or(ExprPtr a, ExprPtr b) {
  return node(ExprKind::Or, {std::move(a), std::move(b)});
}

ExprPtr make_maj(ExprPtr a, ExprPtr b, ExprPtr c) {
  return node(ExprKind::Maj3, {std::move(a), std::move(b), std::move(c)});
}

namespace {

struct Parser {
  const std::string& text;
  const std::set<std::string> known;
  size_t pos = 0;

  Parser(const std::string& t, const std::vector<std::string>& signals)
      : text(t), known(signals.begin(), signals.end()) {}

  [[noreturn]] void fail(const std::string& msg, size_t at) const {
    throw QcaError("parse", msg + " at offset " + std::to_string(at),
                   static_cast<long>(at));
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool eof() {
    skip_ws();
    return pos >= text.size();
  }

  // U+00D7 MULTIPLICATION SIGN in UTF-8 is 0xC3 0x97.
  bool at_times_sign() const {
    return pos + 1 < text.size() &&
           static_cast<unsigned char>(text[pos]) == 0xC3 &&
           static_cast<unsigned char>(text[pos + 1]) == 0x97;
  }

  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  std::string peek_ident() {
    skip_ws();
    size_t p = pos;
    std::string out;
    while (p < text.size() && ident_char(text[p])) out.push_back(text[p++]);
    return out;
  }

  static std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return s;
  }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (true) {
      skip_ws();
      if (pos < text.size() && text[pos] == '+') {
        ++pos;
        lhs = make_or(lhs, parse_and());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_unary();
    while (true) {
      skip_ws();
      if (pos < text.size() && text[pos] == '*') {
        ++pos;
        lhs = make_and(lhs, parse_unary());
      } else if (at_times_sign()) {
        pos += 2;
        lhs = make_and(lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_unary() {
    ExprPtr e = parse_primary();
    while (true) {
      skip_ws();
      if (pos < text.size() && text[pos] == '\'') {
        ++pos;
        e = make_not(e);
      } else {
        return e;
      }
    }
  }

  std::vector<ExprPtr> parse_call_args(const std::string& fn, size_t at) {
    skip_ws();
    if (pos >= text.size() || text[pos] != '(') fail("expected '(' after " + fn, pos);
    ++pos;
    std::vector<ExprPtr> args;
    args.push_back(parse_or());
    while (true) {
      skip_ws();
      if (pos < text.size() && text[pos] == ',') {
        ++pos;
        args.push_back(parse_or());
      } else {
        break;
      }
    }
    skip_ws();
    if (pos >= text.size() || text[pos] != ')') fail("expected ')' in call to " + fn, pos);
    ++pos;
    (void)at;
    return args;
  }

  void expect_arity(const std::string& fn, const std::vector<ExprPtr>& args,
                    size_t n, size_t at) {
    if (args.size() != n)
      fail(fn + " takes " + std::to_string(n) + " arguments, got " +
               std::to_string(args.size()),
           at);
  }

  ExprPtr parse_primary() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of expression", pos);
    char c = text[pos];
    if (c == '(') {
      ++pos;
      ExprPtr e = parse_or();
      skip_ws();
      if (pos >= text.size() || text[pos] != ')') fail("expected ')'", pos);
      ++pos;
      return e;
    }
    if (!ident_char(c)) fail(std::string("unexpected character '") + c + "'", pos);

    size_t at = pos;
    std::string tok = peek_ident();
    pos += tok.size();
    skip_ws();
    bool call = pos < text.size() && text[pos] == '(';

    if (call) {
      std::string fn = upper(tok);
      if (fn == "MAJ") {
        auto a = parse_call_args(tok, at);
        expect_arity(fn, a, 3, at);
        return make_maj(a[0], a[1], a[2]);
      }
      if (fn == "XOR") {
        auto a = parse_call_args(tok, at);
        expect_arity(fn, a, 2, at);
        return make_or(make_and(a[0], make_not(a[1])),
                       make_and(make_not(a[0]), a[1]));
      }
      if (fn == "NAND") {
        auto a = parse_call_args(tok, at);
        expect_arity(fn, a, 2, at);
        return make_not(make_and(a[0], a[1]));
      }
      if (fn == "NOR") {
        auto a = parse_call_args(tok, at);
        expect_arity(fn, a, 2, at);
        return make_not(make_or(a[0], a[1]));
      }
      if (fn == "AND") {
        auto a = parse_call_args(tok, at);
        expect_arity(fn, a, 2, at);
        return make_and(a[0], a[1]);
      }
      if (fn == "OR") {
        auto a = parse_call_args(tok, at);
        expect_arity(fn, a, 2, at);
        return make_or(a[0], a[1]);
      }
      if (fn == "NOT") {
        auto a = parse_call_args(tok, at);
        expect_arity(fn, a, 1, at);
        return make_not(a[0]);
      }
      fail("unknown function '" + tok + "'", at);
    }

    // Declared signals win over literal interpretation so netlists may use
    // bare numeric net names (e.g. ISCAS nets "1", "10").
    if (known.count(tok)) return make_input(tok);
    if (tok == "0") return make_const(0);
    if (tok == "1") return make_const(1);
    fail("unknown identifier '" + tok + "'", at);
  }
};

}  // namespace

ExprPtr parse_expression(const std::string& text,
                         const std::vector<std::string>& known_signals) {
  Parser p(text, known_signals);
  if (p.eof()) throw QcaError("parse", "empty expression", 0);
  ExprPtr e = p.parse_or();
  if (!p.eof())
    p.fail(std::string("unexpected trailing input '") + text[p.pos] + "'", p.pos);
  return e;
}

int eval_oracle(const ExprPtr& expr, const std::map<std::string, int>& assignment) {
  switch (expr->kind) {
    case ExprKind::Input: {
      auto it = assignment.find(expr->input_name);
      if (it == assignment.end())
        throw QcaError("eval", "missing assignment for input '" + expr->input_name + "'");
      return it->second ? 1 : 0;
    }
    case ExprKind::Const:
      return expr->const_value;
    case ExprKind::Not:
      return 1 - eval_oracle(expr->children[0], assignment);
    case ExprKind::And:
      return eval_oracle(expr->children[0], assignment) &
             eval_oracle(expr->children[1], assignment);
    case ExprKind::Or:
      return eval_oracle(expr->children[0], assignment) |
             eval_oracle(expr->children[1], assignment);
    case ExprKind::Maj3: {
      int s = eval_oracle(expr->children[0], assignment) +
              eval_oracle(expr->children[1], assignment) +
              eval_oracle(expr->children[2], assignment);
      return s >= 2 ? 1 : 0;
    }
  }
  throw QcaError("eval", "corrupt expression node");
}

ExprPtr decompose(const ExprPtr& expr, DecomposeMode mode) {
  std::vector<ExprPtr> kids;
  kids.reserve(expr->children.size());
  for (const auto& c : expr->children) kids.push_back(decompose(c, mode));

  switch (expr->kind) {
    case ExprKind::Input:
    case ExprKind::Const:
      return expr;
    case ExprKind::Not:
      return make_not(kids[0]);
    case ExprKind::And:
      if (mode == DecomposeMode::Majority)
        return make_maj(kids[0], kids[1], make_const(0));
      return make_and(kids[0], kids[1]);
    case ExprKind::Or:
      if (mode == DecomposeMode::Majority)
        return make_maj(kids[0], kids[1], make_const(1));
      return make_or(kids[0], kids[1]);
    case ExprKind::Maj3:
      if (mode == DecomposeMode::Basic)
        return make_or(make_or(make_and(kids[0], kids[1]), make_and(kids[0], kids[2])),
                       make_and(kids[1], kids[2]));
      return make_maj(kids[0], kids[1], kids[2]);
  }
  throw QcaError("decompose", "corrupt expression node");
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (a->kind != b->kind) return false;
  if (a->kind == ExprKind::Input) return a->input_name == b->input_name;
  if (a->kind == ExprKind::Const) return a->const_value == b->const_value;
  if (a->children.size() != b->children.size()) return false;
  for (size_t i = 0; i < a->children.size(); ++i)
    if (!structurally_equal(a->children[i], b->children[i])) return false;
  return true;
}

namespace {

void collect_inputs_rec(const ExprPtr& e, std::vector<std::string>& out,
                        std::set<std::string>& seen) {
  if (e->kind == ExprKind::Input) {
    if (seen.insert(e->input_name).second) out.push_back(e->input_name);
    return;
  }
  for (const auto& c : e->children) collect_inputs_rec(c, out, seen);
}

}  // namespace

std::vector<std::string> collect_inputs(const ExprPtr& expr) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  collect_inputs_rec(expr, out, seen);
  return out;
}

std::string to_string(const ExprPtr& expr) {
  switch (expr->kind) {
    case ExprKind::Input:
      return expr->input_name;
    case ExprKind::Const:
      return expr->const_value ? "1" : "0";
    case ExprKind::Not: {
      const auto& c = expr->children[0];
      if (c->kind == ExprKind::Input || c->kind == ExprKind::Const ||
          c->kind == ExprKind::Maj3)
        return to_string(c) + "'";
      return "(" + to_string(c) + ")'";
    }
    case ExprKind::And: {
      auto wrap = [](const ExprPtr& c) {
        std::string s = to_string(c);
        return c->kind == ExprKind::Or ? "(" + s + ")" : s;
      };
      return wrap(expr->children[0]) + " * " + wrap(expr->children[1]);
    }
    case ExprKind::Or:
      return to_string(expr->children[0]) + " + " + to_string(expr->children[1]);
    case ExprKind::Maj3:
      return "MAJ(" + to_string(expr->children[0]) + ", " +
             to_string(expr->children[1]) + ", " + to_string(expr->children[2]) + ")";
  }
  return "?";
}

}  // namespace qcaforge
