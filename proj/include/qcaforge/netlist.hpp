#pragma once

#include <string>
#include <vector>

#include "qcaforge/expr.hpp"

namespace qcaforge {

// A parsed circuit file: declared inputs, named assignments in definition
// order, and the declared outputs. Assignment names are designer-marked
// signals: when referenced more than once they stay shared in the netlist
// instead of being duplicated.
struct Circuit {
  std::vector<std::string> inputs;
  std::vector<std::pair<std::string, ExprPtr>> assignments;
  std::vector<std::string> outputs;
};

// Line-oriented circuit format:
//   # comment
//   INPUT a b c
//   OUTPUT x y
//   name = <expression>
// A file with no INPUT/OUTPUT headers is treated as one bare expression with
// inputs collected in first-use order and a single output named "out".
Circuit parse_circuit(const std::string& text);

enum class GateKind { And, Or, Not, Maj3 };

enum class SignalOrigin { InputOccurrence, GateOutput, Constant };

struct NetSignal {
  int id = -1;
  SignalOrigin origin = SignalOrigin::Constant;
  std::string input_name;            // InputOccurrence: which circuit input
  int gate_id = -1;                  // GateOutput: producing gate
  int const_value = 0;               // Constant
  std::string label;                 // designer name when assigned
  bool shared = false;               // designer-marked reuse, fan-out may be >1
  bool is_output = false;
  std::string output_name;
  std::vector<int> consumer_gates;   // gates reading this signal
};

struct NetGate {
  int id = -1;
  GateKind kind = GateKind::And;
  std::vector<int> inputs;   // signal ids; And/Or 2, Not 1, Maj3 3
  int output = -1;           // signal id
  int stage = 0;             // ASAP stage; Not gates carry their driver's stage
};

// Branch-free gate netlist. Every signal has fan-out <= 1 except signals
// marked shared (named assignments) whose consumers the planner taps from one
// line. Input occurrences list one entry per line the input side will need.
struct GateNetlist {
  std::vector<NetGate> gates;
  std::vector<NetSignal> signals;
  std::vector<std::string> input_order;  // distinct circuit inputs
  std::vector<int> input_occurrences;    // signal ids, grouped by input, input_order order
  std::vector<int> outputs;              // signal ids in declared output order
  bool branch_eliminated = false;

  int n_inputs() const { return static_cast<int>(input_order.size()); }
  int n_occurrences() const { return static_cast<int>(input_occurrences.size()); }
  int n_gates() const { return static_cast<int>(gates.size()); }
  int n_not() const;
  int n_stages() const;
};

struct NetlistOptions {
  // When true, shared named signals are expanded like anonymous ones and the
  // result is a pure forest (used by the fallback placement strategy).
  bool duplicate_shared = false;
};

// Shared-DAG form: each distinct input appears as exactly one occurrence and
// named signals keep their fan-out. This is the form the dimension
// inequalities of the methodology describe.
GateNetlist netlistify_shared(const Circuit& circuit);

// Branch-eliminated form: anonymous fan-out is removed by duplicating logic
// down to the inputs, and each input's remaining consumers are partitioned
// into chains of strictly increasing stage; each chain becomes one input
// occurrence (one crossbar line feeding taps column after column).
GateNetlist netlistify(const Circuit& circuit, const NetlistOptions& options = {});

// Single-expression convenience used by tests.
GateNetlist netlistify(const ExprPtr& expr, const NetlistOptions& options = {});

// Independent longest-path recount of the stage indices (verification oracle).
int count_stages_dfs(const GateNetlist& net);

// Per-gate effective stage of a consumer as used by the chain partition: the
// stage of the first And/Or/Maj3 gate at or after `gate_id` on its path.
int effective_stage(const GateNetlist& net, int gate_id);

}  // namespace qcaforge
