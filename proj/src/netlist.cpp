#include "qcaforge/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace qcaforge {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// First-use identifier scan for bare expressions (no INPUT header). Skips
// function names, literals and operators.
std::vector<std::string> scan_identifiers(const std::string& text) {
  static const std::set<std::string> fns = {"MAJ", "XOR", "NAND", "NOR",
                                            "AND", "OR",  "NOT"};
  std::vector<std::string> out;
  std::set<std::string> seen;
  size_t i = 0;
  auto ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  };
  while (i < text.size()) {
    if (!ident_char(text[i])) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < text.size() && ident_char(text[j])) ++j;
    std::string tok = text.substr(i, j - i);
    size_t k = j;
    while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
    bool call = k < text.size() && text[k] == '(';
    std::string up = tok;
    std::transform(up.begin(), up.end(), up.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    if (!(call && fns.count(up)) && tok != "0" && tok != "1" && !seen.count(tok)) {
      seen.insert(tok);
      out.push_back(tok);
    }
    i = j;
  }
  return out;
}

}  // namespace

Circuit parse_circuit(const std::string& text) {
  // First pass: strip comments, classify the file.
  std::vector<std::pair<long, std::string>> lines;  // line number, cleaned text
  {
    std::istringstream in(text);
    std::string raw;
    long line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string line = raw;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = strip(line);
      if (!line.empty()) lines.emplace_back(line_no, line);
    }
  }
  if (lines.empty()) throw QcaError("parse", "empty circuit", 0);

  bool header_mode = false;
  for (const auto& [no, line] : lines) {
    auto words = split_ws(line);
    if (words[0] == "INPUT" || words[0] == "OUTPUT" ||
        line.find('=') != std::string::npos) {
      header_mode = true;
      break;
    }
  }

  Circuit c;
  if (!header_mode) {
    // Bare expression, possibly spread over several lines.
    std::string whole;
    for (const auto& [no, line] : lines) {
      if (!whole.empty()) whole += ' ';
      whole += line;
    }
    auto ids = scan_identifiers(whole);
    if (ids.empty() && whole.find_first_of("01") == std::string::npos)
      throw QcaError("parse", "empty circuit", 0);
    c.inputs = ids;
    c.assignments.emplace_back("out", parse_expression(whole, ids));
    c.outputs.push_back("out");
    return c;
  }

  std::vector<std::string> known;
  std::set<std::string> known_set;
  std::vector<std::pair<std::string, std::string>> pending;  // name, expr text

  for (const auto& [line_no, line] : lines) {
    auto words = split_ws(line);
    if (words[0] == "INPUT") {
      for (size_t i = 1; i < words.size(); ++i) {
        const std::string& name = words[i];
        if (name == "0" || name == "1")
          throw QcaError("parse", "input may not be named '" + name + "'", line_no);
        if (known_set.count(name))
          throw QcaError("parse", "duplicate input '" + name + "'", line_no);
        known_set.insert(name);
        known.push_back(name);
        c.inputs.push_back(name);
      }
      continue;
    }
    if (words[0] == "OUTPUT") {
      for (size_t i = 1; i < words.size(); ++i) c.outputs.push_back(words[i]);
      continue;
    }
    size_t eq = line.find('=');
    if (eq != std::string::npos) {
      std::string name = strip(line.substr(0, eq));
      std::string body = strip(line.substr(eq + 1));
      if (name.empty() || split_ws(name).size() != 1)
        throw QcaError("parse",
                       "bad assignment target on line " + std::to_string(line_no),
                       line_no);
      pending.emplace_back(name, body);
      continue;
    }
    throw QcaError("parse",
                   "unparseable line " + std::to_string(line_no) + ": " + line, line_no);
  }

  if (c.inputs.empty())
    throw QcaError("parse", "missing INPUT declaration");

  for (auto& [name, body] : pending) {
    if (name == "0" || name == "1")
      throw QcaError("parse", "signal may not be named '" + name + "'");
    if (known_set.count(name))
      throw QcaError("parse", "signal '" + name + "' defined twice");
    ExprPtr e = parse_expression(body, known);
    known_set.insert(name);
    known.push_back(name);
    c.assignments.emplace_back(name, e);
  }

  if (c.outputs.empty()) {
    if (c.assignments.empty())
      throw QcaError("parse", "no OUTPUT declared");
    c.outputs.push_back(c.assignments.back().first);
  }
  std::set<std::string> out_seen;
  for (const auto& o : c.outputs) {
    if (!known_set.count(o))
      throw QcaError("parse", "output '" + o + "' is never defined");
    if (!out_seen.insert(o).second)
      throw QcaError("parse", "output '" + o + "' listed twice");
  }
  return c;
}

int GateNetlist::n_not() const {
  int n = 0;
  for (const auto& g : gates)
    if (g.kind == GateKind::Not) ++n;
  return n;
}

int GateNetlist::n_stages() const {
  int m = 0;
  for (const auto& g : gates)
    if (g.kind != GateKind::Not) m = std::max(m, g.stage + 1);
  return m;
}

namespace {

struct Builder {
  GateNetlist net;

  int new_signal(SignalOrigin origin) {
    NetSignal s;
    s.id = static_cast<int>(net.signals.size());
    s.origin = origin;
    net.signals.push_back(s);
    return s.id;
  }

  int new_gate(GateKind kind, std::vector<int> inputs) {
    NetGate g;
    g.id = static_cast<int>(net.gates.size());
    g.kind = kind;
    g.inputs = std::move(inputs);
    g.output = new_signal(SignalOrigin::GateOutput);
    net.signals[g.output].gate_id = g.id;
    for (int s : g.inputs) net.signals[s].consumer_gates.push_back(g.id);
    net.gates.push_back(g);
    return g.output;
  }

  // Stage height of a signal: number of And/Or/Maj3 gates strictly below it.
  int height(int sig) const {
    const NetSignal& s = net.signals[sig];
    if (s.origin != SignalOrigin::GateOutput) return 0;
    const NetGate& g = net.gates[s.gate_id];
    if (g.kind == GateKind::Not) return height(g.inputs[0]);
    return g.stage + 1;
  }

  void finish_stages() {
    for (auto& g : net.gates) {
      int h = 0;
      for (int s : g.inputs) h = std::max(h, height(s));
      g.stage = h;  // Not gates carry the driver height too (bookkeeping)
      if (g.kind == GateKind::Not) g.stage = height(g.inputs[0]);
    }
  }

  int build(const ExprPtr& e, const std::map<std::string, int>& env) {
    switch (e->kind) {
      case ExprKind::Input: {
        auto it = env.find(e->input_name);
        if (it == env.end())
          throw QcaError("netlist", "unknown signal '" + e->input_name + "'");
        return it->second;
      }
      case ExprKind::Const: {
        int id = new_signal(SignalOrigin::Constant);
        net.signals[id].const_value = e->const_value;
        return id;
      }
      case ExprKind::Not:
        return new_gate(GateKind::Not, {build(e->children[0], env)});
      case ExprKind::And:
        return new_gate(GateKind::And,
                        {build(e->children[0], env), build(e->children[1], env)});
      case ExprKind::Or:
        return new_gate(GateKind::Or,
                        {build(e->children[0], env), build(e->children[1], env)});
      case ExprKind::Maj3:
        return new_gate(GateKind::Maj3,
                        {build(e->children[0], env), build(e->children[1], env),
                         build(e->children[2], env)});
    }
    throw QcaError("netlist", "corrupt expression node");
  }
};

GateNetlist build_dag(const Circuit& circuit, bool inline_named) {
  Builder b;
  std::map<std::string, int> env;
  b.net.input_order = circuit.inputs;
  for (const auto& name : circuit.inputs) {
    int id = b.new_signal(SignalOrigin::InputOccurrence);
    b.net.signals[id].input_name = name;
    b.net.signals[id].label = name;
    env[name] = id;
  }

  if (inline_named) {
    // Substitute named references by their defining expressions so that the
    // resulting netlist is a pure forest over input references.
    std::map<std::string, ExprPtr> defs;
    std::function<ExprPtr(const ExprPtr&)> inl = [&](const ExprPtr& e) -> ExprPtr {
      switch (e->kind) {
        case ExprKind::Input: {
          auto it = defs.find(e->input_name);
          return it == defs.end() ? e : it->second;
        }
        case ExprKind::Const:
          return e;
        case ExprKind::Not:
          return make_not(inl(e->children[0]));
        case ExprKind::And:
          return make_and(inl(e->children[0]), inl(e->children[1]));
        case ExprKind::Or:
          return make_or(inl(e->children[0]), inl(e->children[1]));
        case ExprKind::Maj3:
          return make_maj(inl(e->children[0]), inl(e->children[1]),
                          inl(e->children[2]));
      }
      return e;
    };
    for (const auto& [name, expr] : circuit.assignments) defs[name] = inl(expr);
    for (const auto& name : circuit.outputs) {
      auto it = defs.find(name);
      int sig = it == defs.end() ? env.at(name) : b.build(it->second, env);
      b.net.signals[sig].is_output = true;
      b.net.signals[sig].output_name = name;
      if (b.net.signals[sig].label.empty()) b.net.signals[sig].label = name;
      b.net.outputs.push_back(sig);
    }
  } else {
    for (const auto& [name, expr] : circuit.assignments) {
      int sig = b.build(expr, env);
      b.net.signals[sig].label = name;
      env[name] = sig;
    }
    for (const auto& name : circuit.outputs) {
      int sig = env.at(name);
      b.net.signals[sig].is_output = true;
      b.net.signals[sig].output_name = name;
      b.net.outputs.push_back(sig);
    }
  }

  b.finish_stages();

  for (const auto& name : circuit.inputs) b.net.input_occurrences.push_back(env[name]);
  for (auto& s : b.net.signals) {
    int fanout = static_cast<int>(s.consumer_gates.size()) + (s.is_output ? 1 : 0);
    s.shared = fanout > 1 && s.origin == SignalOrigin::GateOutput;
  }
  return b.net;
}

}  // namespace

int effective_stage(const GateNetlist& net, int gate_id) {
  const NetGate& g = net.gates[gate_id];
  if (g.kind != GateKind::Not) return g.stage;
  const NetSignal& out = net.signals[g.output];
  if (out.consumer_gates.empty()) return net.n_stages();
  int m = net.n_stages();
  for (int c : out.consumer_gates) m = std::min(m, effective_stage(net, c));
  return m;
}

GateNetlist netlistify_shared(const Circuit& circuit) {
  return build_dag(circuit, false);
}

GateNetlist netlistify(const Circuit& circuit, const NetlistOptions& options) {
  GateNetlist net = build_dag(circuit, options.duplicate_shared);

  // Partition each input's consumer terminals into chains; every chain is one
  // crossbar line. Along a line the effective stages must strictly increase
  // (taps at the earlier gates, the line ends at the last consumer or runs
  // through to the output side for a passthrough), except that a line may end
  // in a plus junction feeding two gates of the same column: such a chain
  // absorbs one extra terminal of its final stage and is closed by it.
  std::vector<int> base_inputs = net.input_occurrences;
  net.input_occurrences.clear();

  for (int base : base_inputs) {
    const std::string input_name = net.signals[base].input_name;
    const bool is_output = net.signals[base].is_output;
    const std::vector<int> consumers = net.signals[base].consumer_gates;

    struct Terminal {
      int gate;   // -1 for the output-side binding of a passthrough
      int port;   // index into gate inputs
      int stage;
    };
    std::vector<Terminal> terms;
    std::set<std::pair<int, int>> seen;  // a gate reading base twice appears
    for (int g : consumers) {            // twice in consumers; visit each port once
      const NetGate& gate = net.gates[g];
      for (int p = 0; p < static_cast<int>(gate.inputs.size()); ++p)
        if (gate.inputs[p] == base && seen.insert({g, p}).second)
          terms.push_back({g, p, effective_stage(net, g)});
    }
    std::stable_sort(terms.begin(), terms.end(),
                     [](const Terminal& a, const Terminal& b) { return a.stage < b.stage; });
    if (is_output) terms.push_back({-1, -1, net.n_stages() + 1});

    struct Chain {
      std::vector<Terminal> terms;
      bool closed = false;  // ended by a plus junction; cannot extend further
    };
    std::vector<Chain> chains;
    for (const auto& t : terms) {
      int best = -1;
      for (int i = 0; i < static_cast<int>(chains.size()); ++i) {
        if (chains[i].closed) continue;
        int last = chains[i].terms.back().stage;
        if (last < t.stage && (best == -1 || last > chains[best].terms.back().stage))
          best = i;
      }
      if (best >= 0) {
        chains[best].terms.push_back(t);
        continue;
      }
      int pair = -1;
      for (int i = 0; i < static_cast<int>(chains.size()); ++i)
        if (!chains[i].closed && !chains[i].terms.empty() &&
            chains[i].terms.back().stage == t.stage) {
          pair = i;
          break;
        }
      if (pair >= 0) {
        chains[pair].terms.push_back(t);
        chains[pair].closed = true;
        continue;
      }
      chains.push_back({{t}, false});
    }
    if (chains.empty()) chains.push_back({});  // unread input still gets a line

    bool first = true;
    for (auto& chain_rec : chains) {
      auto& chain = chain_rec.terms;
      int occ;
      if (first) {
        occ = base;  // reuse the existing signal record for the first chain
        net.signals[base].consumer_gates.clear();
        first = false;
      } else {
        NetSignal s;
        s.id = static_cast<int>(net.signals.size());
        s.origin = SignalOrigin::InputOccurrence;
        s.input_name = input_name;
        s.label = input_name;
        net.signals.push_back(s);
        occ = s.id;
      }
      for (const auto& t : chain) {
        if (t.gate < 0) continue;  // output-side binding stays on signal `base`
        net.gates[t.gate].inputs[t.port] = occ;
        net.signals[occ].consumer_gates.push_back(t.gate);
      }
      net.input_occurrences.push_back(occ);
    }
  }

  net.branch_eliminated = true;
  return net;
}

GateNetlist netlistify(const ExprPtr& expr, const NetlistOptions& options) {
  Circuit c;
  c.inputs = collect_inputs(expr);
  c.assignments.emplace_back("out", expr);
  c.outputs.push_back("out");
  return netlistify(c, options);
}

int count_stages_dfs(const GateNetlist& net) {
  // Independent recount: longest And/Or/Maj3 chain from any leaf to any output.
  std::function<int(int)> depth = [&](int sig) -> int {
    const NetSignal& s = net.signals[sig];
    if (s.origin != SignalOrigin::GateOutput) return 0;
    const NetGate& g = net.gates[s.gate_id];
    int best = 0;
    for (int in : g.inputs) best = std::max(best, depth(in));
    return best + (g.kind == GateKind::Not ? 0 : 1);
  };
  int best = 0;
  for (int out : net.outputs) best = std::max(best, depth(out));
  // Shared signals may also dead-end inside the DAG; outputs dominate, but a
  // netlist with no outputs still reports its deepest gate.
  if (net.outputs.empty())
    for (const auto& g : net.gates) best = std::max(best, depth(g.output));
  return best;
}

}  // namespace qcaforge
