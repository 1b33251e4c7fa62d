#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcaforge {

// Error thrown by any pipeline stage. `stage` names the stage ("parse",
// "netlist", "plan", "layout", "sim", "verify", "qcaio", "cli"); `position`
// is a character offset into the source text for parse errors, or the sample
// index for simulation errors, -1 otherwise.
struct QcaError : std::runtime_error {
  std::string stage;
  long position;

  QcaError(std::string stage_, const std::string& message, long position_ = -1)
      : std::runtime_error(message), stage(std::move(stage_)), position(position_) {}
};

enum class ExprKind { Input, Const, Not, And, Or, Maj3 };

struct BoolExpr;
using ExprPtr = std::shared_ptr<const BoolExpr>;

// Immutable expression tree. And/Or have exactly 2 children, Maj3 exactly 3,
// Not exactly 1, Input/Const none.
struct BoolExpr {
  ExprKind kind = ExprKind::Const;
  std::vector<ExprPtr> children;
  std::string input_name;  // kind == Input
  int const_value = 0;     // kind == Const, 0 or 1
};

ExprPtr make_input(const std::string& name);
ExprPtr make_const(int value);
ExprPtr make_not(ExprPtr a);
ExprPtr make_and(ExprPtr a, ExprPtr b);
ExprPtr make_or(ExprPtr a, ExprPtr b);
ExprPtr make_maj(ExprPtr a, ExprPtr b, ExprPtr c);

// Grammar accepted by parse_expression:
//   expr    := term ('+' term)*
//   term    := unary (('*' | '×') unary)*
//   unary   := primary '\''*
//   primary := '(' expr ')' | '0' | '1' | ident | call
//   call    := (MAJ|XOR|NAND|NOR|AND|OR|NOT) '(' expr (',' expr)* ')'
// Precedence NOT > AND > OR. XOR/NAND/NOR are sugar expanded at parse time:
// XOR(a,b) = (a*b') + (a'*b), NAND = NOT(AND), NOR = NOT(OR).
// Every identifier must be present in known_signals; digit-only tokens that
// are declared signals parse as references, otherwise "0"/"1" are constants.
ExprPtr parse_expression(const std::string& text,
                         const std::vector<std::string>& known_signals);

// Standard Boolean semantics; Maj3 is true iff at least two children are true.
// Throws QcaError when an input of the expression is missing from assignment.
int eval_oracle(const ExprPtr& expr, const std::map<std::string, int>& assignment);

enum class DecomposeMode {
  Basic,     // rewrite Maj3 to AND/OR form: maj(a,b,c) = ab + ac + bc
  Majority,  // rewrite AND(a,b) -> MAJ(a,b,0), OR(a,b) -> MAJ(a,b,1)
};

ExprPtr decompose(const ExprPtr& expr, DecomposeMode mode);

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

// Distinct input names in first-occurrence order.
std::vector<std::string> collect_inputs(const ExprPtr& expr);

// Round-trippable rendering using the expression grammar.
std::string to_string(const ExprPtr& expr);

}  // namespace qcaforge
