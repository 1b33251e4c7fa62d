#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "qcaforge/netlist.hpp"

using namespace qcaforge;

namespace {

const char* kSharedSignal = R"(
INPUT In1 In2 In3
OUTPUT Out
S = In1 + In2
Out = S' + (S * In3)
)";

const char* kInputInverters = R"(
INPUT In1 In2 In3
OUTPUT Out
Out = (In1' * In2) + (In3' + In2)
)";

const char* kFullAdder = R"(
INPUT A B Cin
OUTPUT Sum Cout
Cout = MAJ(A, B, Cin)
Sum = MAJ(Cout', MAJ(A, B, Cin'), Cin)
)";

int occurrences_of(const GateNetlist& n, const std::string& name) {
  int k = 0;
  for (int s : n.input_occurrences)
    if (n.signals[s].input_name == name) ++k;
  return k;
}

// Oracle comparison between a netlist evaluation and the circuit expressions.
int eval_net_signal(const GateNetlist& n, int sig,
                    const std::map<std::string, int>& asg) {
  const NetSignal& s = n.signals[sig];
  if (s.origin == SignalOrigin::Constant) return s.const_value;
  if (s.origin == SignalOrigin::InputOccurrence) return asg.at(s.input_name);
  const NetGate& g = n.gates[s.gate_id];
  std::vector<int> v;
  for (int in : g.inputs) v.push_back(eval_net_signal(n, in, asg));
  switch (g.kind) {
    case GateKind::Not: return 1 - v[0];
    case GateKind::And: return v[0] & v[1];
    case GateKind::Or: return v[0] | v[1];
    case GateKind::Maj3: return (v[0] + v[1] + v[2] >= 2) ? 1 : 0;
  }
  return -1;
}

}  // namespace

TEST_CASE("circuit parsing: headers, comments, assignment order") {
  auto c = parse_circuit("# half adder\nINPUT A B\nOUTPUT Sum Carry\n"
                         "Carry = A * B\nSum = (A + B) * Carry'\n");
  CHECK(c.inputs == std::vector<std::string>{"A", "B"});
  CHECK(c.outputs == std::vector<std::string>{"Sum", "Carry"});
  REQUIRE(c.assignments.size() == 2);
  CHECK(c.assignments[0].first == "Carry");
}

TEST_CASE("bare expression files collect inputs in first-use order") {
  auto c = parse_circuit("(x + y)' * z\n");
  CHECK(c.inputs == std::vector<std::string>{"x", "y", "z"});
  CHECK(c.outputs == std::vector<std::string>{"out"});
}

TEST_CASE("circuit parse errors") {
  CHECK_THROWS_AS(parse_circuit(""), QcaError);
  CHECK_THROWS_AS(parse_circuit("INPUT a a\nOUTPUT a\n"), QcaError);
  CHECK_THROWS_AS(parse_circuit("INPUT a\nOUTPUT b\n"), QcaError);
  CHECK_THROWS_AS(parse_circuit("INPUT a\nOUTPUT x\nx = q + a\n"), QcaError);
  CHECK_THROWS_AS(parse_circuit("INPUT a\nOUTPUT x\nx = a\nx = a\n"), QcaError);
  // Use-before-definition is rejected, which also rules out cycles.
  CHECK_THROWS_AS(parse_circuit("INPUT a\nOUTPUT x\ny = x * a\nx = a'\n"), QcaError);
}

TEST_CASE("first worked circuit: 4 gates, 1 NOT, 3 stages with shared S") {
  auto net = netlistify(parse_circuit(kSharedSignal));
  CHECK(net.n_inputs() == 3);
  CHECK(net.n_gates() == 4);
  CHECK(net.n_not() == 1);
  CHECK(net.n_stages() == 3);
  CHECK(net.n_occurrences() == 3);
  CHECK(count_stages_dfs(net) == 3);

  // S is designer-marked: fan-out 2 survives branch elimination.
  int shared = 0;
  for (const auto& s : net.signals)
    if (s.shared) {
      ++shared;
      CHECK(s.label == "S");
      CHECK(s.consumer_gates.size() == 2);
    }
  CHECK(shared == 1);
}

TEST_CASE("full adder: 4 occurrences from branch elimination, 2 stages") {
  auto net = netlistify(parse_circuit(kFullAdder));
  CHECK(net.n_inputs() == 3);
  // A and B each feed the two stage-0 majorities, reachable through one plus
  // junction; Cin needs a tap chain (stage 0 then 1) plus a junction pair with
  // its NOT, which also closes at stage 0.
  CHECK(net.n_occurrences() == 4);
  CHECK(occurrences_of(net, "A") == 1);
  CHECK(occurrences_of(net, "B") == 1);
  CHECK(occurrences_of(net, "Cin") == 2);
  CHECK(net.n_stages() == 2);
  CHECK(count_stages_dfs(net) == 2);
  int maj = 0, nots = 0;
  for (const auto& g : net.gates) {
    if (g.kind == GateKind::Maj3) ++maj;
    if (g.kind == GateKind::Not) ++nots;
  }
  CHECK(maj == 3);
  CHECK(nots == 2);
}

TEST_CASE("second worked circuit counts") {
  auto net = netlistify(parse_circuit(kInputInverters));
  CHECK(net.n_inputs() == 3);
  CHECK(net.n_gates() == 5);
  CHECK(net.n_not() == 2);
  CHECK(net.n_stages() == 2);
  CHECK(count_stages_dfs(net) == 2);
  // In2 feeds two same-stage gates through one plus junction: one chain each
  // for In1, In2, In3.
  CHECK(net.n_occurrences() == 3);
  CHECK(occurrences_of(net, "In2") == 1);
}

TEST_CASE("shared-DAG form keeps one occurrence per distinct input") {
  auto net = netlistify_shared(parse_circuit(kFullAdder));
  CHECK(net.n_occurrences() == 3);
  CHECK(net.n_stages() == 2);
  CHECK(net.n_gates() == 5);
}

TEST_CASE("single NOT of one input has zero majority stages") {
  auto net = netlistify(parse_circuit("INPUT a\nOUTPUT x\nx = a'\n"));
  CHECK(net.n_gates() == 1);
  CHECK(net.n_not() == 1);
  CHECK(net.n_stages() == 0);
  CHECK(count_stages_dfs(net) == 0);
}

TEST_CASE("passthrough of two inputs: no gates, one occurrence each") {
  auto net = netlistify(parse_circuit("INPUT a b\nOUTPUT a b\n"));
  CHECK(net.n_gates() == 0);
  CHECK(net.n_occurrences() == 2);
  CHECK(net.n_stages() == 0);
  REQUIRE(net.outputs.size() == 2);
  CHECK(net.signals[net.outputs[0]].is_output);
}

TEST_CASE("branch elimination: produced signals have fan-out 1, occurrence "
          "chains increase in stage with at most one closing junction pair") {
  const char* files[] = {kSharedSignal, kInputInverters, kFullAdder};
  for (const char* f : files) {
    auto net = netlistify(parse_circuit(f));
    for (const auto& s : net.signals) {
      int fanout = static_cast<int>(s.consumer_gates.size());
      if (s.origin == SignalOrigin::GateOutput && !s.shared) CHECK(fanout <= 1);
      if (s.origin == SignalOrigin::InputOccurrence) {
        for (size_t i = 1; i < s.consumer_gates.size(); ++i) {
          int prev = effective_stage(net, s.consumer_gates[i - 1]);
          int cur = effective_stage(net, s.consumer_gates[i]);
          if (i + 1 == s.consumer_gates.size())
            CHECK(prev <= cur);  // final pair may share one column's junction
          else
            CHECK(prev < cur);
        }
      }
    }
    // Stage monotonicity along every edge.
    for (const auto& g : net.gates) {
      if (g.kind == GateKind::Not) continue;
      for (int in : g.inputs) {
        const NetSignal& s = net.signals[in];
        if (s.origin != SignalOrigin::GateOutput) continue;
        const NetGate& src = net.gates[s.gate_id];
        if (src.kind == GateKind::Not) continue;
        CHECK(src.stage < g.stage);
      }
    }
  }
}

TEST_CASE("duplicate_shared inlines named signals into a forest") {
  NetlistOptions opt;
  opt.duplicate_shared = true;
  auto net = netlistify(parse_circuit(kSharedSignal), opt);
  for (const auto& s : net.signals) CHECK_FALSE(s.shared);
  // The OR feeding both consumers is now computed twice; the duplicated
  // stage-0 ORs read In1/In2 as same-stage junction pairs.
  CHECK(net.n_gates() == 5);
  CHECK(net.n_occurrences() == 3);
  CHECK(net.n_stages() == 3);
}

TEST_CASE("chains partition consumers by stage with one junction pair allowed") {
  // a feeds a stage-0 AND and a stage-2 AND: both ride one chain/line.
  auto one = netlistify(parse_circuit("INPUT a b c\nOUTPUT x\nx = (a * b + c) * a\n"));
  CHECK(one.branch_eliminated);
  CHECK(occurrences_of(one, "a") == 1);

  // Three same-stage consumers: one junction pair plus one extra occurrence.
  auto three = netlistify(parse_circuit(
      "INPUT a b c d\nOUTPUT x\nx = ((a * b) + (a * c)) + (a * d)\n"));
  CHECK(occurrences_of(three, "a") == 2);
}

TEST_CASE("netlist evaluation agrees with the expression oracle") {
  const char* files[] = {kSharedSignal, kInputInverters, kFullAdder};
  for (const char* f : files) {
    auto circ = parse_circuit(f);
    auto net = netlistify(circ);
    for (unsigned v = 0; v < (1u << circ.inputs.size()); ++v) {
      std::map<std::string, int> asg;
      for (size_t i = 0; i < circ.inputs.size(); ++i)
        asg[circ.inputs[i]] = (v >> (circ.inputs.size() - 1 - i)) & 1;
      // Reference: evaluate assignments in order.
      std::map<std::string, int> env = asg;
      for (const auto& [name, e] : circ.assignments) {
        std::map<std::string, int> full = env;
        env[name] = eval_oracle(e, full);
      }
      for (size_t oi = 0; oi < net.outputs.size(); ++oi) {
        int got = eval_net_signal(net, net.outputs[oi], asg);
        CHECK(got == env.at(net.signals[net.outputs[oi]].output_name));
      }
    }
  }
}
