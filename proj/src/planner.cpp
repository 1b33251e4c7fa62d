#include "qcaforge/planner.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qcaforge {

namespace {

using Key = std::pair<int, int>;  // (line, column)

constexpr int kOpen = -1;  // span death column not yet known / output

struct Span {
  int signal = -1;  // -2 marks a constant feed segment
  int born = 0;
  int dies = kOpen;
};

bool span_covers(const Span& s, int c) {
  return s.born <= c && (s.dies == kOpen || s.dies >= c);
}

// ---------------------------------------------------------------------------
// Dimension bounds
// ---------------------------------------------------------------------------

}  // namespace

DimensionBounds compute_dimension_bounds(const GateNetlist& net) {
  DimensionBounds b;
  b.lines = {net.n_occurrences(), net.n_occurrences() + net.n_not()};
  b.columns = {net.n_stages(), net.n_gates()};
  return b;
}

int CrossbarPlan::realized_occurrences() const { return netlist.n_occurrences(); }
int CrossbarPlan::realized_not_gates() const { return netlist.n_not(); }
int CrossbarPlan::realized_gates() const { return netlist.n_gates() - netlist.n_not(); }
int CrossbarPlan::realized_stages() const { return netlist.n_stages(); }

namespace {

// ---------------------------------------------------------------------------
// Exact search (small netlist strategy)
// ---------------------------------------------------------------------------

struct Term {
  int gate = -1;  // -1: the output-side binding of a passthrough
  int port = -1;
  int stage = 0;
};

// A chain is legal when its stages strictly increase, except that the final
// two may tie: that pair realizes as one plus junction closing the line.
bool chain_legal(const std::vector<Term>& chain) {
  for (size_t i = 1; i < chain.size(); ++i) {
    if (chain[i - 1].stage > chain[i].stage) return false;
    if (chain[i - 1].stage == chain[i].stage && i + 1 != chain.size()) return false;
  }
  return true;
}

bool chain_has_pair(const std::vector<Term>& chain) {
  size_t n = chain.size();
  return n >= 2 && chain[n - 2].stage == chain[n - 1].stage;
}

// Restricted-growth enumeration of set partitions into legal chains.
void enum_partitions(const std::vector<Term>& terms,
                     const std::function<void(const std::vector<std::vector<Term>>&)>& cb) {
  std::vector<std::vector<Term>> blocks;
  std::function<void(size_t)> rec = [&](size_t i) {
    if (i == terms.size()) {
      for (const auto& b : blocks)
        if (!chain_legal(b)) return;
      cb(blocks);
      return;
    }
    for (size_t b = 0; b <= blocks.size(); ++b) {
      if (b == blocks.size())
        blocks.push_back({terms[i]});
      else
        blocks[b].push_back(terms[i]);
      rec(i + 1);
      if (b == blocks.size() - 1 && blocks[b].size() == 1)
        blocks.pop_back();
      else
        blocks[b].pop_back();
    }
  };
  rec(0);
}

// The junction-aware greedy partition used by netlistify; its chain count is
// the baseline against which "extra splits" are measured.
int greedy_chain_count(std::vector<Term> terms) {
  std::stable_sort(terms.begin(), terms.end(),
                   [](const Term& a, const Term& b) { return a.stage < b.stage; });
  std::vector<std::pair<int, bool>> chains;  // (last stage, closed)
  for (const auto& t : terms) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(chains.size()); ++i)
      if (!chains[i].second && chains[i].first < t.stage &&
          (best == -1 || chains[i].first > chains[best].first))
        best = i;
    if (best >= 0) {
      chains[best].first = t.stage;
      continue;
    }
    int pair = -1;
    for (int i = 0; i < static_cast<int>(chains.size()); ++i)
      if (!chains[i].second && chains[i].first == t.stage) {
        pair = i;
        break;
      }
    if (pair >= 0)
      chains[pair].second = true;
    else
      chains.push_back({t.stage, false});
  }
  if (chains.empty()) return 1;
  return static_cast<int>(chains.size());
}

// Per-signal run state during the placement search.
struct SigState {
  int line = -1;
  int born = 0;
  int dies = kOpen;
  std::vector<Term> terms;  // consumption order
  size_t next = 0;
  bool is_output = false;
  bool junction_open = false;  // first arm of a closing pair taken
  int junction_line = -1;      // line of the first pair gate
};

struct Placement {
  int gate_id = -1;
  int line = -1;
  int column = -1;  // stage-space
  std::vector<Feed> feeds;
  ProgramSource program_source = ProgramSource::None;
  int program_value = -1;
  NotMode not_mode = NotMode::Jog;
  int output_line = -1;
};

struct State {
  std::vector<SigState> sigs;
  std::vector<std::vector<Span>> lines;
  std::map<Key, int> devices;      // device cross-points
  std::set<Key> crossed;           // rows crossed by a vertical corridor
  std::map<Key, int> gaps;         // inter-line gap usage; key = (upper line, col)
  std::set<std::pair<int, char>> programs;  // (column, 'T'/'B') used
  std::set<Key> leaf_ends;         // input rows emptied by a leaf inverter
  std::vector<Placement> placed;
  bool relaxed = false;
};

struct Item {
  bool fresh_not = false;
  int chain_sig = -1;     // occurrence signal id (chains)
  int not_gate = -1;      // fresh landing line for this NOT
  int leaf_chain_of = -1; // chain item index holding the NOT's source terminal
};

struct SearchProblem {
  GateNetlist net;
  std::vector<Item> items;
  std::vector<int> gate_order;  // And/Or/Maj3 ids by (stage, id)
  int n_cols = 0;               // stage-space column count
  int splits = 0;
};

class Search {
 public:
  Search(const SearchProblem& p, const PlannerOptions& opt, long* budget)
      : p_(p), opt_(opt), budget_(budget) {}

  bool run(std::vector<int> perm, State& out) {
    perm_ = std::move(perm);
    line_of_item_.assign(p_.items.size(), -1);
    for (size_t i = 0; i < perm_.size(); ++i) line_of_item_[perm_[i]] = static_cast<int>(i);
    // Leaf fresh-NOT landing lines must sit next to their source chain.
    for (size_t it = 0; it < p_.items.size(); ++it)
      if (p_.items[it].fresh_not && p_.items[it].leaf_chain_of >= 0)
        if (std::abs(line_of_item_[it] - line_of_item_[p_.items[it].leaf_chain_of]) != 1)
          return false;
    State st = initial_state();
    return dfs(st, 0, out);
  }

 private:
  State initial_state() const {
    State st;
    st.sigs.resize(p_.net.signals.size());
    st.lines.resize(p_.items.size());
    for (size_t s = 0; s < p_.net.signals.size(); ++s) {
      const NetSignal& sig = p_.net.signals[s];
      SigState& ss = st.sigs[s];
      ss.is_output = sig.is_output;
      std::set<std::pair<int, int>> seen;
      for (int g : sig.consumer_gates) {
        const NetGate& gate = p_.net.gates[g];
        for (int port = 0; port < static_cast<int>(gate.inputs.size()); ++port)
          if (gate.inputs[port] == static_cast<int>(s) && seen.insert({g, port}).second)
            ss.terms.push_back({g, port, effective_stage(p_.net, g)});
      }
      std::stable_sort(ss.terms.begin(), ss.terms.end(),
                       [](const Term& a, const Term& b) { return a.stage < b.stage; });
    }
    for (size_t it = 0; it < p_.items.size(); ++it) {
      const Item& item = p_.items[it];
      if (item.chain_sig >= 0) {
        SigState& ss = st.sigs[item.chain_sig];
        ss.line = line_of_item_[it];
        ss.born = 0;
        st.lines[ss.line].push_back({item.chain_sig, 0, kOpen});
      }
    }
    return st;
  }

  bool line_crossable(const State& st, int line, int c) const {
    for (const auto& sp : st.lines[line])
      if (span_covers(sp, c)) return false;
    if (st.devices.count({line, c})) return false;
    return true;
  }

  // Vertical corridor at column c between a device line and a source line.
  bool corridor_ok(const State& st, int gate_line, int src_line, int c) const {
    int lo = std::min(gate_line, src_line), hi = std::max(gate_line, src_line);
    for (int l = lo + 1; l < hi; ++l)
      if (!line_crossable(st, l, c)) return false;
    for (int g = lo; g < hi; ++g)
      if (st.gaps.count({g, c})) return false;
    return true;
  }

  void register_corridor(State& st, int gate_line, int src_line, int c, int owner) const {
    int lo = std::min(gate_line, src_line), hi = std::max(gate_line, src_line);
    for (int l = lo + 1; l < hi; ++l) st.crossed.insert({l, c});
    for (int g = lo; g < hi; ++g) st.gaps[{g, c}] = owner;
  }

  // Serve signal s's next terminal, which must be (gate, c). `device_on_line`
  // says the consumer sits on s's own line (Through).
  bool serve_term(State& st, int s, int gate, int c, bool through) const {
    SigState& ss = st.sigs[s];
    if (ss.next >= ss.terms.size()) return false;
    // Junction pairs are served in either order; other terms strictly in order.
    size_t idx = ss.next;
    if (ss.terms[idx].gate != gate) {
      if (chain_has_pair(ss.terms) && idx + 2 == ss.terms.size() &&
          ss.terms[idx + 1].gate == gate)
        std::swap(ss.terms[idx], ss.terms[idx + 1]);
      if (ss.terms[idx].gate != gate) return false;
    }
    bool last = idx + 1 == ss.terms.size();
    bool in_pair = chain_has_pair(ss.terms) && idx + 2 >= ss.terms.size();
    if (through) {
      if (!last || ss.is_output || in_pair) return false;
      ss.dies = c;
      close_span(st, s, c);
    } else if (in_pair) {
      if (last) {  // second junction arm: the pair closes the line
        if (ss.is_output) return false;
        ss.dies = c;
        close_span(st, s, c);
      }
    } else if (last && !ss.is_output) {
      ss.dies = c;  // turning arm consumes the line
      close_span(st, s, c);
      // A leaf inverter pattern sits left of the column's arm slot, so the
      // emptied input row stays crossable for this column's program arms.
      if (p_.net.gates[gate].kind == GateKind::Not &&
          p_.net.signals[s].origin == SignalOrigin::InputOccurrence)
        st.leaf_ends.insert({ss.line, c});
    }
    ++ss.next;
    return true;
  }

  void close_span(State& st, int s, int c) const {
    for (auto& sp : st.lines[st.sigs[s].line])
      if (sp.signal == s && sp.dies == kOpen) sp.dies = c;
  }

  // Resolve a NOT gate whose output `s` is consumed by a gate at (line, c).
  // Returns candidate feeds; each candidate captures the state mutation in a
  // fresh copy pushed to `outs`.
  struct NotCand {
    State st;
    Feed feed;
    Placement notp;
    bool landed = false;  // output now line-resident (arm/through resolved later)
  };

  void resolve_not(const State& st, int not_gate, int cons_line, int c,
                   std::vector<NotCand>& outs) const {
    const NetGate& n = p_.net.gates[not_gate];
    int s = n.output;
    int t = n.inputs[0];
    const SigState& ts = st.sigs[t];
    if (ts.line < 0) return;  // source itself unplaced (NOT of NOT handled via landing)
    int fresh_item = fresh_item_of(not_gate);
    bool single_consumer = st.sigs[s].terms.size() <= 1 && !st.sigs[s].is_output;

    auto base_place = [&](NotMode mode, int out_line) {
      Placement pl;
      pl.gate_id = not_gate;
      pl.line = ts.line;
      pl.column = c;
      pl.not_mode = mode;
      pl.output_line = out_line;
      Feed f;
      f.style = FeedStyle::Through;
      f.signal = t;
      pl.feeds.push_back(f);
      return pl;
    };

    if (fresh_item >= 0) {
      int land = line_of_item_[fresh_item];
      if (std::abs(land - ts.line) != 1) return;
      if (st.devices.count({land, c}) || st.crossed.count({land, c})) return;
      State nst = st;
      if (!serve_term(nst, t, not_gate, c, false)) return;
      if (nst.gaps.count({std::min(land, ts.line), c})) return;
      nst.gaps[{std::min(land, ts.line), c}] = not_gate;
      SigState& os = nst.sigs[s];
      os.line = land;
      os.born = c;
      nst.lines[land].push_back({s, c, kOpen});
      NotCand cand{std::move(nst), {}, base_place(NotMode::LandFresh, land), true};
      outs.push_back(std::move(cand));
      return;
    }

    // Jog straight into the consumer's arm: the diagonal hop must seed off
    // the end of the source line, so the source has to die at the NOT.
    bool source_dies = ts.next + 1 == ts.terms.size() && !ts.is_output;
    if (single_consumer && source_dies && cons_line >= 0 &&
        std::abs(ts.line - cons_line) == 1) {
      State nst = st;
      if (serve_term(nst, t, not_gate, c, false)) {
        int gap = std::min(ts.line, cons_line);
        if (!nst.gaps.count({gap, c})) {
          nst.gaps[{gap, c}] = not_gate;
          Feed f;
          f.style = FeedStyle::InvertedArm;
          f.signal = s;
          f.source_line = ts.line;
          f.from_above = ts.line < cons_line;
          NotCand cand{std::move(nst), f, base_place(NotMode::Jog, cons_line), false};
          outs.push_back(std::move(cand));
        }
      }
    }

    // Land on a dead adjacent line and ride it.
    std::vector<int> land_cands;
    for (int d : {ts.line + 1, ts.line - 1})
      if (d >= 0 && d < static_cast<int>(st.lines.size())) land_cands.push_back(d);
    if (opt_.not_output == NotOutput::Up) std::reverse(land_cands.begin(), land_cands.end());
    if (!opt_.reuse_lines) land_cands.clear();
    for (int land : land_cands) {
      bool dead = true;
      for (const auto& sp : st.lines[land])
        if (sp.dies == kOpen || sp.dies >= c) dead = false;
      if (!dead || st.devices.count({land, c}) || st.crossed.count({land, c}))
        continue;
      State nst = st;
      if (!serve_term(nst, t, not_gate, c, false)) continue;
      int gap = std::min(land, ts.line);
      if (nst.gaps.count({gap, c})) continue;
      nst.gaps[{gap, c}] = not_gate;
      SigState& os = nst.sigs[s];
      os.line = land;
      os.born = c;
      nst.lines[land].push_back({s, c, kOpen});
      NotCand cand{std::move(nst), {}, base_place(NotMode::LandDead, land), true};
      outs.push_back(std::move(cand));
    }
  }

  int fresh_item_of(int not_gate) const {
    for (size_t i = 0; i < p_.items.size(); ++i)
      if (p_.items[i].fresh_not && p_.items[i].not_gate == not_gate)
        return static_cast<int>(i);
    return -1;
  }

  // Arm feed from a line-resident signal into the gate at (line, c).
  bool arm_feed(State& st, int s, int gate, int line, int c, Feed& out) const {
    SigState& ss = st.sigs[s];
    if (ss.line < 0 || ss.line == line || ss.born > c) return false;
    bool alive = false;
    for (const auto& sp : st.lines[ss.line])
      if (sp.signal == s && span_covers(sp, c)) alive = true;
    if (!alive) return false;
    bool in_pair = chain_has_pair(ss.terms) && ss.next + 2 >= ss.terms.size();
    if (in_pair && ss.junction_open) {
      // Second junction arm: the source must lie strictly between the gates.
      int lo = std::min(line, ss.junction_line), hi = std::max(line, ss.junction_line);
      if (!(lo < ss.line && ss.line < hi)) return false;
    }
    if (!corridor_ok(st, line, ss.line, c)) return false;
    int src_line = ss.line;
    bool was_pair_first = in_pair && !ss.junction_open;
    if (!serve_term(st, s, gate, c, false)) return false;
    if (was_pair_first) {
      ss.junction_open = true;
      ss.junction_line = line;
    }
    register_corridor(st, line, src_line, c, gate);
    out.style = FeedStyle::SideArm;
    out.signal = s;
    out.source_line = src_line;
    out.from_above = src_line < line;
    return true;
  }

  // Program/constant resolution for one And/Or gate after its column filled.
  bool assign_program(State& st, Placement& pl, int c) const {
    const NetGate& g = p_.net.gates[pl.gate_id];
    int value = g.kind == GateKind::Or ? 1 : 0;
    std::set<int> occupied;
    for (const auto& [key, gid] : st.devices)
      if (key.second == c) occupied.insert(key.first);
    for (size_t l = 0; l < st.lines.size(); ++l)
      for (const auto& sp : st.lines[l])
        if (span_covers(sp, c) &&
            !(sp.dies == c && st.leaf_ends.count({static_cast<int>(l), c})))
          occupied.insert(static_cast<int>(l));
    bool has_through = false, has_above = false, has_below = false;
    for (const auto& f : pl.feeds) {
      if (f.style == FeedStyle::Through) has_through = true;
      if (f.style == FeedStyle::SideArm || f.style == FeedStyle::InvertedArm)
        (f.from_above ? has_above : has_below) = true;
    }
    auto extreme = [&](bool bottom) {
      return bottom ? (*occupied.rbegin() == pl.line) : (*occupied.begin() == pl.line);
    };
    for (bool bottom : {true, false}) {  // prefer the bottom program line
      char tag = bottom ? 'B' : 'T';
      if (st.programs.count({c, tag}) || !extreme(bottom)) continue;
      if ((bottom && has_below) || (!bottom && has_above)) continue;
      st.programs.insert({c, tag});
      pl.program_source = bottom ? ProgramSource::Bottom : ProgramSource::Top;
      pl.program_value = value;
      Feed f;
      f.style = FeedStyle::ProgramArm;
      f.const_value = value;
      f.from_above = !bottom;
      pl.feeds.push_back(f);
      return true;
    }
    if (opt_.strict_program_lines) return false;
    st.relaxed = true;
    pl.program_source = ProgramSource::InputSide;
    pl.program_value = value;
    Feed f;
    f.const_value = value;
    if (!has_through) {
      bool left_free = true;
      for (const auto& sp : st.lines[pl.line])
        if (sp.signal != -2 && span_covers(sp, c) && sp.born < c) left_free = false;
      if (left_free) {
        f.style = FeedStyle::ConstFeed;
        st.lines[pl.line].push_back({-2, c, c});
        pl.feeds.push_back(f);
        return true;
      }
    }
    f.style = FeedStyle::ConstArm;
    for (bool above : {true, false}) {
      if (above && has_above) continue;
      if (!above && has_below) continue;
      int gap = above ? pl.line - 1 : pl.line;
      if (st.gaps.count({gap, c})) continue;
      f.from_above = above;
      st.gaps[{gap, c}] = pl.gate_id;
      pl.feeds.push_back(f);
      return true;
    }
    return false;
  }

  bool dfs(State& st, size_t wi, State& out) {
    if (--(*budget_) < 0) return false;
    if (wi == p_.gate_order.size()) return finalize(st, out);
    int gid = p_.gate_order[wi];
    const NetGate& g = p_.net.gates[gid];
    int c = g.stage;
    bool column_done = wi + 1 == p_.gate_order.size() ||
                       p_.net.gates[p_.gate_order[wi + 1]].stage != c;

    // Candidate device lines: Through lines first (input order), then landed
    // NOT outputs consumed as Through, then dead lines, highest index first.
    struct Cand {
      int line;
      int through_sig = -1;   // signal entering as Through (already resident)
      int through_not = -1;   // NOT to land on `line` first, then Through
    };
    std::vector<Cand> cands;
    std::vector<Cand> not_cands;
    for (int in : g.inputs) {
      const NetSignal& sig = p_.net.signals[in];
      const SigState& ss = st.sigs[in];
      if (sig.origin == SignalOrigin::GateOutput &&
          p_.net.gates[sig.gate_id].kind == GateKind::Not && ss.line < 0) {
        // Landing line then Through: enumerate via resolve_not against line -1.
        // Leaf inverter patterns consumed as Through need the dedicated first
        // column, so reject them past column 0.
        int src = p_.net.gates[sig.gate_id].inputs[0];
        if (p_.net.signals[src].origin == SignalOrigin::InputOccurrence && c > 0)
          continue;
        not_cands.push_back({-1, -1, sig.gate_id});
        continue;
      }
      if (ss.line < 0) continue;
      bool last = ss.next + 1 == ss.terms.size();
      bool pair = chain_has_pair(ss.terms) && ss.next + 2 >= ss.terms.size();
      if (last && !pair && !ss.is_output && ss.terms[ss.next].gate == gid)
        cands.push_back({ss.line, in, -1});
    }
    // An inverter output crosses the device far more reliably as the Through
    // signal than hanging off its landing line as a side arm, so gates go to
    // an inverted input's line first: resident inverter outputs, then
    // land-then-Through, then plain inputs, lower lines first so lone gates
    // gravitate to the bottom program row.
    auto inverted = [&](const Cand& x) {
      if (x.through_sig < 0) return false;
      const NetSignal& s = p_.net.signals[x.through_sig];
      return s.origin == SignalOrigin::GateOutput &&
             p_.net.gates[s.gate_id].kind == GateKind::Not;
    };
    std::stable_sort(cands.begin(), cands.end(),
                     [&](const Cand& a, const Cand& b) {
                       bool ia = inverted(a), ib = inverted(b);
                       if (ia != ib) return ia;
                       return a.line > b.line;
                     });
    size_t n_inv = 0;
    while (n_inv < cands.size() && inverted(cands[n_inv])) ++n_inv;
    cands.insert(cands.begin() + n_inv, not_cands.begin(), not_cands.end());
    if (opt_.reuse_lines) {
      for (int l = static_cast<int>(st.lines.size()) - 1; l >= 0; --l) {
        bool dead = !st.lines[l].empty();
        for (const auto& sp : st.lines[l])
          if (sp.dies == kOpen || sp.dies >= c) dead = false;
        if (dead && !st.devices.count({l, c}) && !st.crossed.count({l, c}))
          cands.push_back({l, -1, -1});
      }
    }

    for (const auto& cand : cands) {
      std::vector<std::pair<State, Placement>> starts;
      if (cand.through_not >= 0) {
        std::vector<NotCand> ncs;
        resolve_not(st, cand.through_not, -1, c, ncs);
        for (auto& nc : ncs) {
          if (!nc.landed) continue;
          int land = nc.notp.output_line;
          if (nc.st.devices.count({land, c}) || nc.st.crossed.count({land, c}))
            continue;
          Placement pl;
          pl.gate_id = gid;
          pl.line = land;
          pl.column = c;
          Feed f;
          f.style = FeedStyle::Through;
          f.signal = p_.net.gates[cand.through_not].output;
          pl.feeds.push_back(f);
          State nst = nc.st;
          if (!serve_term(nst, f.signal, gid, c, true)) continue;
          nst.placed.push_back(nc.notp);
          starts.push_back({std::move(nst), std::move(pl)});
        }
      } else {
        if (st.crossed.count({cand.line, c}) || st.devices.count({cand.line, c}))
          continue;
        Placement pl;
        pl.gate_id = gid;
        pl.line = cand.line;
        pl.column = c;
        State nst = st;
        if (cand.through_sig >= 0) {
          Feed f;
          f.style = FeedStyle::Through;
          f.signal = cand.through_sig;
          if (!serve_term(nst, cand.through_sig, gid, c, true)) continue;
          pl.feeds.push_back(f);
        }
        starts.push_back({std::move(nst), std::move(pl)});
      }

      for (auto& [st0, pl0] : starts) {
        std::vector<State> layer{std::move(st0)};
        std::vector<Placement> pls{std::move(pl0)};
        bool fail = false;
        for (int in : g.inputs) {
          std::vector<State> nlayer;
          std::vector<Placement> npls;
          for (size_t k = 0; k < layer.size(); ++k) {
            State& cur = layer[k];
            Placement& pl = pls[k];
            int served = 0;
            for (const auto& f : pl.feeds)
              if (f.signal == in) ++served;
            int want = 0;
            for (int gi : g.inputs)
              if (gi == in) ++want;
            if (served >= want) {  // port already fed (Through slot)
              nlayer.push_back(cur);
              npls.push_back(pl);
              continue;
            }
            const NetSignal& sig = p_.net.signals[in];
            if (sig.origin == SignalOrigin::GateOutput &&
                p_.net.gates[sig.gate_id].kind == GateKind::Not &&
                cur.sigs[in].line < 0) {
              std::vector<NotCand> ncs;
              resolve_not(cur, sig.gate_id, pl.line, c, ncs);
              for (auto& nc : ncs) {
                State nst = std::move(nc.st);
                Placement npl = pl;
                if (nc.landed) {
                  Feed f;
                  if (!arm_feed(nst, in, gid, npl.line, c, f)) continue;
                  npl.feeds.push_back(f);
                } else {
                  npl.feeds.push_back(nc.feed);
                }
                nst.placed.push_back(nc.notp);
                nlayer.push_back(std::move(nst));
                npls.push_back(std::move(npl));
              }
            } else {
              State nst = cur;
              Feed f;
              if (arm_feed(nst, in, gid, pl.line, c, f)) {
                Placement npl = pl;
                npl.feeds.push_back(f);
                nlayer.push_back(std::move(nst));
                npls.push_back(std::move(npl));
              }
            }
          }
          layer = std::move(nlayer);
          pls = std::move(npls);
          if (layer.empty()) {
            fail = true;
            break;
          }
        }
        if (fail) continue;
        for (size_t k = 0; k < layer.size(); ++k) {
          State nst = std::move(layer[k]);
          Placement pl = std::move(pls[k]);
          nst.devices[{pl.line, c}] = gid;
          // The gate's output takes over its line.
          int os = g.output;
          nst.sigs[os].line = pl.line;
          nst.sigs[os].born = c;
          pl.output_line = pl.line;
          nst.lines[pl.line].push_back({os, c, kOpen});
          pl.program_value = -1;
          nst.placed.push_back(pl);
          if (column_done) {
            // Programs are judged once the whole column is known: extreme
            // lines depend on every placement in it.
            bool ok = true;
            for (auto& done : nst.placed) {
              if (done.column != c) continue;
              GateKind k = p_.net.gates[done.gate_id].kind;
              if (k == GateKind::Not || k == GateKind::Maj3) continue;
              if (!assign_program(nst, done, c)) {
                ok = false;
                break;
              }
            }
            if (!ok || !column_close(nst, c)) continue;
          }
          if (dfs(nst, wi + 1, out)) return true;
        }
      }
    }
    return false;
  }

  // Junction pairs must fully close within their column.
  bool column_close(State& st, int c) const {
    for (auto& ss : st.sigs) {
      if (!ss.junction_open) continue;
      if (ss.next >= ss.terms.size())
        ss.junction_open = false;
      else if (ss.terms[ss.next].stage <= c)
        return false;
    }
    return true;
  }

  bool finalize(State& st, State& out) const {
    // Terminal NOTs (outputs) land after the last column.
    for (size_t s = 0; s < p_.net.signals.size(); ++s) {
      const NetSignal& sig = p_.net.signals[s];
      if (!sig.is_output || st.sigs[s].line >= 0) continue;
      if (sig.origin != SignalOrigin::GateOutput) return false;
      const NetGate& g = p_.net.gates[sig.gate_id];
      if (g.kind != GateKind::Not) return false;
      std::vector<NotCand> ncs;
      resolve_not(st, sig.gate_id, -1, p_.n_cols, ncs);
      bool done = false;
      for (auto& nc : ncs) {
        if (!nc.landed) continue;
        st = std::move(nc.st);
        st.placed.push_back(nc.notp);
        done = true;
        break;
      }
      if (!done) return false;
    }
    for (size_t s = 0; s < p_.net.signals.size(); ++s) {
      const SigState& ss = st.sigs[s];
      if (ss.next != ss.terms.size()) return false;
      if (ss.is_output && ss.line < 0) return false;
    }
    // No two outputs may share a line.
    std::set<int> out_lines;
    for (int os : p_.net.outputs)
      if (!out_lines.insert(st.sigs[os].line).second) return false;
    out = st;
    return true;
  }

  const SearchProblem& p_;
  const PlannerOptions& opt_;
  long* budget_;
  std::vector<int> perm_;
  std::vector<int> line_of_item_;
};

// Materialize one partition combo into a working netlist (occurrence signals
// rebuilt chain by chain).
GateNetlist apply_partition(
    const GateNetlist& base,
    const std::map<std::string, std::vector<std::vector<Term>>>& parts) {
  GateNetlist net = base;
  std::map<std::string, int> first_occ;
  std::map<std::string, std::string> out_name;
  std::vector<int> old_occ = net.input_occurrences;
  for (int o : old_occ) {
    NetSignal& s = net.signals[o];
    if (!first_occ.count(s.input_name)) first_occ[s.input_name] = o;
    if (s.is_output) out_name[s.input_name] = s.output_name;
    s.consumer_gates.clear();
    s.is_output = false;
    s.output_name.clear();
  }
  net.input_occurrences.clear();
  net.outputs.clear();
  for (const std::string& nm : net.input_order) {
    const auto& chains = parts.at(nm);
    bool first = true;
    for (const auto& chain : chains) {
      int occ;
      if (first) {
        occ = first_occ.at(nm);
        first = false;
      } else {
        NetSignal s;
        s.id = static_cast<int>(net.signals.size());
        s.origin = SignalOrigin::InputOccurrence;
        s.input_name = nm;
        s.label = nm;
        net.signals.push_back(s);
        occ = s.id;
      }
      for (const auto& t : chain) {
        if (t.gate < 0) {  // output-side binding rides this chain's line
          net.signals[occ].is_output = true;
          net.signals[occ].output_name = out_name.at(nm);
          continue;
        }
        net.gates[t.gate].inputs[t.port] = occ;
        net.signals[occ].consumer_gates.push_back(t.gate);
      }
      net.input_occurrences.push_back(occ);
    }
  }
  for (const auto& s : net.signals)
    if (s.is_output) net.outputs.push_back(s.id);
  // Keep declared output order.
  std::sort(net.outputs.begin(), net.outputs.end(), [&](int a, int b) {
    auto pos = [&](int sig) {
      for (size_t i = 0; i < base.outputs.size(); ++i)
        if (net.signals[sig].output_name ==
            base.signals[base.outputs[i]].output_name)
          return i;
      return base.outputs.size();
    };
    return pos(a) < pos(b);
  });
  return net;
}

std::vector<Term> input_terms(const GateNetlist& net, const std::string& name) {
  std::vector<Term> terms;
  std::set<std::pair<int, int>> seen;
  for (int o : net.input_occurrences) {
    const NetSignal& s = net.signals[o];
    if (s.input_name != name) continue;
    for (int g : s.consumer_gates) {
      const NetGate& gate = net.gates[g];
      for (int p = 0; p < static_cast<int>(gate.inputs.size()); ++p)
        if (gate.inputs[p] == o && seen.insert({g, p}).second)
          terms.push_back({g, p, effective_stage(net, g)});
    }
  }
  std::stable_sort(terms.begin(), terms.end(),
                   [](const Term& a, const Term& b) { return a.stage < b.stage; });
  if (!net.signals.empty()) {
    for (int o : net.input_occurrences)
      if (net.signals[o].input_name == name && net.signals[o].is_output) {
        terms.push_back({-1, -1, net.n_stages() + 1});
        break;
      }
  }
  return terms;
}

// Build the final CrossbarPlan from a successful search state.
CrossbarPlan build_plan(const SearchProblem& p, const State& st, bool relaxed) {
  CrossbarPlan plan;
  plan.netlist = p.net;
  plan.from_search = true;
  plan.relaxed_constants = relaxed || st.relaxed;
  plan.n_lines = static_cast<int>(st.lines.size());

  // A first-column leaf NOT consumed as Through gets a dedicated column; the
  // whole column-0 leaf bank then moves there.
  int shift = 0;
  for (const auto& pl : st.placed) {
    if (p.net.gates[pl.gate_id].kind != GateKind::Not) continue;
    if (pl.not_mode == NotMode::Jog || pl.column != 0) continue;
    int t = p.net.gates[pl.gate_id].inputs[0];
    if (p.net.signals[t].origin != SignalOrigin::InputOccurrence) continue;
    int out_sig = p.net.gates[pl.gate_id].output;
    for (const auto& pl2 : st.placed)
      for (const auto& f : pl2.feeds)
        if (f.style == FeedStyle::Through && f.signal == out_sig) shift = 1;
  }
  plan.n_columns = p.n_cols + shift;
  // Terminal NOTs (inverted outputs) occupy a trailing bank column.
  for (const auto& pl : st.placed)
    if (pl.column == p.n_cols) plan.n_columns = p.n_cols + shift + 1;

  auto mapc = [&](int c, bool gate_col, bool leaf_not) {
    if (leaf_not && shift && c == 0) return 0;
    (void)gate_col;
    return c + shift;
  };

  // Outputs of the column-0 input-side NOT bank start in the dedicated column.
  std::set<int> leaf_not_out;
  for (const auto& pl : st.placed) {
    const NetGate& ng = p.net.gates[pl.gate_id];
    if (ng.kind == GateKind::Not && pl.not_mode != NotMode::Jog &&
        pl.column == 0 &&
        p.net.signals[ng.inputs[0]].origin == SignalOrigin::InputOccurrence)
      leaf_not_out.insert(ng.output);
  }

  plan.lines.resize(st.lines.size());
  for (size_t l = 0; l < st.lines.size(); ++l) {
    PlanLine& line = plan.lines[l];
    line.index = static_cast<int>(l);
    for (const auto& sp : st.lines[l]) {
      if (sp.signal == -2) continue;
      LineSpan ls;
      ls.signal = sp.signal;
      const NetSignal& sig = p.net.signals[sp.signal];
      bool from_input = sig.origin == SignalOrigin::InputOccurrence;
      ls.from_column = from_input ? 0
                       : leaf_not_out.count(sp.signal) && shift
                           ? 0
                           : sp.born + shift;
      // Input rows emptied by the column-0 leaf bank end in that column.
      bool leaf_end = sp.dies != kOpen &&
                      st.leaf_ends.count({static_cast<int>(l), sp.dies});
      ls.to_column = sp.dies == kOpen ? plan.n_columns
                     : leaf_end && shift && sp.dies == 0
                         ? 0
                         : std::min(sp.dies + shift, plan.n_columns);
      line.timeline.push_back(ls);
      if (from_input && sp.born == 0) line.input_occurrence = sp.signal;
      if (sig.is_output) {
        ls.to_column = plan.n_columns;
        line.timeline.back().to_column = plan.n_columns;
        line.output_name = sig.output_name;
      }
    }
    std::sort(line.timeline.begin(), line.timeline.end(),
              [](const LineSpan& a, const LineSpan& b) {
                return a.from_column < b.from_column;
              });
  }

  for (const auto& pl : st.placed) {
    PlannedGate g;
    const NetGate& ng = p.net.gates[pl.gate_id];
    g.gate_id = pl.gate_id;
    g.kind = ng.kind;
    g.line = pl.line;
    bool leaf_not =
        ng.kind == GateKind::Not &&
        p.net.signals[ng.inputs[0]].origin == SignalOrigin::InputOccurrence &&
        pl.not_mode != NotMode::Jog;
    g.column = mapc(pl.column, ng.kind != GateKind::Not, leaf_not);
    g.feeds = pl.feeds;
    g.program_source = pl.program_source;
    g.program_value = pl.program_value;
    g.not_mode = pl.not_mode;
    g.not_output = pl.output_line > pl.line ? NotOutput::Down : NotOutput::Up;
    g.output_line = pl.output_line;
    g.output_signal = ng.output;
    int idx = static_cast<int>(plan.gates.size());
    Key k{g.line, g.column};
    if (ng.kind == GateKind::Not && plan.crosspoints.count(k))
      k = {g.output_line, g.column};
    if (!plan.crosspoints.count(k)) plan.crosspoints[k] = idx;
    plan.gates.push_back(g);
  }
  std::sort(plan.gates.begin(), plan.gates.end(),
            [](const PlannedGate& a, const PlannedGate& b) {
              if (a.column != b.column) return a.column < b.column;
              if (a.line != b.line) return a.line < b.line;
              return a.gate_id < b.gate_id;
            });
  plan.crosspoints.clear();
  for (size_t i = 0; i < plan.gates.size(); ++i) {
    const PlannedGate& g = plan.gates[i];
    Key k{g.line, g.column};
    if (plan.crosspoints.count(k)) k = {g.output_line, g.column};
    if (g.kind != GateKind::Not || g.not_mode != NotMode::Jog)
      plan.crosspoints[k] = static_cast<int>(i);
  }
  plan.notes.push_back("placement by exact search over occurrence splits, line orders and gate lines");
  if (shift) plan.notes.push_back("input-side NOT bank occupies a dedicated first column");
  return plan;
}

// A side arm fed from an inverter landing line is the least robust feed
// shape in the fabric, so plan selection avoids it even at the cost of a
// column or an extra occurrence split.
int count_inverter_arms(const CrossbarPlan& cp) {
  int n = 0;
  for (const auto& g : cp.gates)
    for (const auto& f : g.feeds) {
      if (f.style != FeedStyle::SideArm || f.signal < 0) continue;
      const NetSignal& s = cp.netlist.signals[f.signal];
      if (s.origin == SignalOrigin::GateOutput &&
          cp.netlist.gates[s.gate_id].kind == GateKind::Not)
        ++n;
    }
  return n;
}

bool try_strategy_search(const GateNetlist& base, const PlannerOptions& opt,
                         CrossbarPlan& out) {
  // Collect per-input terminals and candidate partitions.
  std::vector<std::string> inputs = base.input_order;
  std::vector<std::vector<std::vector<std::vector<Term>>>> per_input;  // input -> combos
  std::vector<int> greedy_counts;
  for (const auto& nm : inputs) {
    auto terms = input_terms(base, nm);
    if (terms.size() > 4) return false;
    std::vector<std::vector<std::vector<Term>>> combos;
    if (terms.empty()) {
      combos.push_back({{}});
    } else {
      enum_partitions(terms, [&](const std::vector<std::vector<Term>>& blocks) {
        combos.push_back(blocks);
      });
    }
    greedy_counts.push_back(greedy_chain_count(terms));
    per_input.push_back(std::move(combos));
  }

  // Shared named signals must themselves form one legal chain.
  for (const auto& s : base.signals) {
    if (!s.shared) continue;
    std::vector<Term> terms;
    for (int g : s.consumer_gates) terms.push_back({g, 0, effective_stage(base, g)});
    std::stable_sort(terms.begin(), terms.end(),
                     [](const Term& a, const Term& b) { return a.stage < b.stage; });
    if (!chain_legal(terms)) return false;
  }

  std::vector<int> not_gates;
  int and_or = 0;
  for (const auto& g : base.gates) {
    if (g.kind == GateKind::Not)
      not_gates.push_back(g.id);
    else
      ++and_or;
  }
  if (and_or > 8 || not_gates.size() > 3) return false;

  // Enumerate (partition combo, fresh-NOT subset) buckets in cost order:
  // extra splits first, then total line count.
  struct Member {
    std::map<std::string, std::vector<std::vector<Term>>> parts;
    std::vector<int> fresh;  // NOT gate ids with landing lines of their own
    int splits = 0;
    int items = 0;
  };
  std::vector<Member> members;
  std::vector<size_t> idx(inputs.size(), 0);
  while (true) {
    Member m;
    int chains = 0, splits = 0;
    for (size_t i = 0; i < inputs.size(); ++i) {
      const auto& blocks = per_input[i][idx[i]];
      m.parts[inputs[i]] = blocks;
      chains += static_cast<int>(blocks.size());
      splits += static_cast<int>(blocks.size()) - greedy_counts[i];
    }
    m.splits = splits;
    for (unsigned mask = 0; mask < (1u << not_gates.size()); ++mask) {
      Member fm = m;
      for (size_t b = 0; b < not_gates.size(); ++b)
        if (mask & (1u << b)) fm.fresh.push_back(not_gates[b]);
      fm.items = chains + static_cast<int>(fm.fresh.size());
      if (fm.items <= 8) members.push_back(fm);
    }
    size_t i = 0;
    while (i < inputs.size() && ++idx[i] == per_input[i].size()) idx[i++] = 0;
    if (i == inputs.size()) break;
  }
  std::stable_sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
    if (a.splits != b.splits) return a.splits < b.splits;
    return a.items < b.items;
  });

  const CrossbarPlan* best = nullptr;
  CrossbarPlan best_plan;
  int cur_splits = -1, cur_items = -1;
  long budget = 4000000;  // shared search budget; exhausted -> block strategy
  for (const auto& m : members) {
    // Stop at the cheapest bucket that produced a plan, unless that plan
    // still leans on an inverter-fed side arm and budget remains to look for
    // a shape without one in a costlier bucket.
    if (best && (m.splits != cur_splits || m.items != cur_items) &&
        count_inverter_arms(best_plan) == 0)
      break;
    if (budget <= 0) {
      if (!best) return false;
      break;
    }
    GateNetlist net = apply_partition(base, m.parts);

    SearchProblem p;
    p.net = net;
    p.n_cols = net.n_stages();
    p.splits = m.splits;
    for (const auto& g : net.gates)
      if (g.kind != GateKind::Not) p.gate_order.push_back(g.id);
    // Within a column, gates without inverted inputs place first: they retire
    // shared source chains, which lets a later gate take its inverter as a
    // jog off the dying line instead of a fragile landed arm.
    auto n_inverted = [&](int gid) {
      int n = 0;
      for (int in : net.gates[gid].inputs) {
        const NetSignal& s = net.signals[in];
        if (s.origin == SignalOrigin::GateOutput &&
            net.gates[s.gate_id].kind == GateKind::Not)
          ++n;
      }
      return n;
    };
    std::sort(p.gate_order.begin(), p.gate_order.end(), [&](int a, int b) {
      if (net.gates[a].stage != net.gates[b].stage)
        return net.gates[a].stage < net.gates[b].stage;
      int ia = n_inverted(a), ib = n_inverted(b);
      if (ia != ib) return ia < ib;
      return a < b;
    });
    // Items: occurrence chains in order, then fresh NOT landing lines.
    std::map<int, int> chain_item_of_sig;
    for (int o : net.input_occurrences) {
      Item it;
      it.chain_sig = o;
      chain_item_of_sig[o] = static_cast<int>(p.items.size());
      p.items.push_back(it);
    }
    for (int ng : m.fresh) {
      Item it;
      it.fresh_not = true;
      it.not_gate = ng;
      int src = net.gates[ng].inputs[0];
      if (net.signals[src].origin == SignalOrigin::InputOccurrence)
        it.leaf_chain_of = chain_item_of_sig.at(src);
      p.items.push_back(it);
    }

    Search search(p, opt, &budget);
    std::vector<int> perm(p.items.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    std::sort(perm.begin(), perm.end());
    do {
      State st;
      if (!search.run(perm, st)) continue;
      CrossbarPlan plan = build_plan(p, st, false);
      auto better = [&](const CrossbarPlan& a, const CrossbarPlan& b) {
        int ia = count_inverter_arms(a), ib = count_inverter_arms(b);
        if (ia != ib) return ia < ib;
        if (a.n_columns != b.n_columns) return a.n_columns < b.n_columns;
        return !a.relaxed_constants && b.relaxed_constants;
      };
      bool same_bucket = best && m.splits == cur_splits && m.items == cur_items;
      bool accept = !best ||
                    (same_bucket ? better(plan, best_plan)
                                 : count_inverter_arms(plan) <
                                       count_inverter_arms(best_plan));
      if (accept) {
        best_plan = plan;
        best = &best_plan;
        cur_splits = m.splits;
        cur_items = m.items;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  if (!best) return false;
  out = best_plan;
  return true;
}

// ---------------------------------------------------------------------------
// Constructive block strategy (larger netlists; duplicates shared logic)
// ---------------------------------------------------------------------------

struct BBuild {
  const GateNetlist* src = nullptr;
  GateNetlist net;  // realized tree netlist
  std::vector<Placement> placed;
  std::vector<std::vector<Span>> lines;
  std::vector<int> line_input;  // occurrence signal per line, -1 if none
  int next_line = 0;

  int subtree_lines(int sig) const {
    const NetSignal& s = src->signals[sig];
    if (s.origin != SignalOrigin::GateOutput) return 1;
    const NetGate& g = src->gates[s.gate_id];
    if (g.kind == GateKind::Not) return 1 + subtree_lines(g.inputs[0]);
    int n = 0;
    for (int in : g.inputs) n += subtree_lines(in);
    return n;
  }
};

struct BBlock {
  int top = 0;
  int sig = -1;    // realized signal riding the top line
  int ready = -1;  // column after which the signal is available
};

int b_alloc_line(BBuild& b) {
  b.lines.emplace_back();
  b.line_input.push_back(-1);
  return b.next_line++;
}

BBlock b_emit(BBuild& b, int src_sig);

BBlock b_emit_leaf(BBuild& b, int src_sig) {
  const NetSignal& s = b.src->signals[src_sig];
  int line = b_alloc_line(b);
  NetSignal occ;
  occ.id = static_cast<int>(b.net.signals.size());
  occ.origin = SignalOrigin::InputOccurrence;
  occ.input_name = s.input_name;
  occ.label = s.input_name;
  b.net.signals.push_back(occ);
  b.net.input_occurrences.push_back(occ.id);
  b.lines[line].push_back({occ.id, 0, kOpen});
  b.line_input[line] = occ.id;
  return {line, occ.id, -1};
}

BBlock b_emit(BBuild& b, int src_sig) {
  const NetSignal& s = b.src->signals[src_sig];
  if (s.origin == SignalOrigin::InputOccurrence) return b_emit_leaf(b, src_sig);
  const NetGate& g = b.src->gates[s.gate_id];

  if (g.kind == GateKind::Not) {
    int land = b_alloc_line(b);
    BBlock child = b_emit(b, g.inputs[0]);
    // The inverter tap must sit right of whatever produced its input: leaf
    // wires are tappable from column 0, gate outputs only past their column.
    int col = std::max(child.ready, 0);
    const NetSignal& cs = b.net.signals[child.sig];
    if (cs.origin == SignalOrigin::GateOutput) {
      if (b.net.gates[cs.gate_id].kind == GateKind::Not) {
        for (const auto& prev : b.placed)
          if (prev.gate_id == cs.gate_id) col = prev.column + 1;
      } else {
        col = child.ready + 1;
      }
    }
    NetGate ng;
    ng.id = static_cast<int>(b.net.gates.size());
    ng.kind = GateKind::Not;
    ng.inputs = {child.sig};
    ng.stage = col;
    NetSignal os;
    os.id = static_cast<int>(b.net.signals.size());
    os.origin = SignalOrigin::GateOutput;
    os.gate_id = ng.id;
    ng.output = os.id;
    b.net.gates.push_back(ng);
    b.net.signals.push_back(os);
    b.net.signals[child.sig].consumer_gates.push_back(ng.id);

    Placement pl;
    pl.gate_id = ng.id;
    pl.line = child.top;
    pl.column = col;
    pl.not_mode = NotMode::LandFresh;
    pl.output_line = land;
    Feed f;
    f.style = FeedStyle::Through;
    f.signal = child.sig;
    pl.feeds.push_back(f);
    b.placed.push_back(pl);

    for (auto& sp : b.lines[child.top])
      if (sp.signal == child.sig) sp.dies = col;
    b.lines[land].push_back({os.id, col, kOpen});
    return {land, os.id, col - 1};
  }

  // And/Or/Maj3: lay children as stacked blocks. The Through child goes on
  // top; for Maj3 the device sits on the middle block's live line.
  std::vector<int> kids(g.inputs.begin(), g.inputs.end());
  int through_idx = 0;
  if (kids.size() == 2 && b.subtree_lines(kids[1]) < b.subtree_lines(kids[0]))
    through_idx = 1;
  std::vector<int> order;
  if (kids.size() == 3) {
    order = {kids[1], kids[0], kids[2]};
    through_idx = 1;  // middle block
  } else {
    order.push_back(kids[through_idx]);
    for (size_t i = 0; i < kids.size(); ++i)
      if (static_cast<int>(i) != through_idx) order.push_back(kids[i]);
  }
  std::vector<BBlock> blocks;
  for (int k : order) blocks.push_back(b_emit(b, k));
  BBlock& tb = blocks[kids.size() == 3 ? 1 : 0];

  int col = 0;
  for (const auto& bl : blocks) col = std::max(col, bl.ready + 1);
  for (auto& bl : blocks) bl.ready = col;  // consumed here

  NetGate ng;
  ng.id = static_cast<int>(b.net.gates.size());
  ng.kind = g.kind;
  for (size_t i = 0; i < blocks.size(); ++i) ng.inputs.push_back(blocks[i].sig);
  ng.stage = col;
  NetSignal os;
  os.id = static_cast<int>(b.net.signals.size());
  os.origin = SignalOrigin::GateOutput;
  os.gate_id = ng.id;
  ng.output = os.id;
  b.net.gates.push_back(ng);
  b.net.signals.push_back(os);
  for (const auto& bl : blocks) b.net.signals[bl.sig].consumer_gates.push_back(ng.id);

  Placement pl;
  pl.gate_id = ng.id;
  pl.line = tb.top;
  pl.column = col;
  pl.output_line = tb.top;
  for (size_t i = 0; i < blocks.size(); ++i) {
    Feed f;
    if (&blocks[i] == &tb) {
      f.style = FeedStyle::Through;
      f.signal = blocks[i].sig;
    } else {
      f.style = FeedStyle::SideArm;
      f.signal = blocks[i].sig;
      f.source_line = blocks[i].top;
      f.from_above = blocks[i].top < tb.top;
    }
    pl.feeds.push_back(f);
  }
  if (g.kind != GateKind::Maj3) {
    pl.program_source = ProgramSource::InputSide;
    pl.program_value = g.kind == GateKind::Or ? 1 : 0;
    Feed f;
    f.style = FeedStyle::ConstArm;
    f.const_value = pl.program_value;
    f.from_above = true;
    for (const auto& ff : pl.feeds)
      if ((ff.style == FeedStyle::SideArm || ff.style == FeedStyle::InvertedArm) &&
          ff.from_above)
        f.from_above = false;
    pl.feeds.push_back(f);
  } else {
    pl.program_value = -1;
  }
  b.placed.push_back(pl);

  for (const auto& bl : blocks)
    for (auto& sp : b.lines[bl.top])
      if (sp.signal == bl.sig && sp.dies == kOpen) sp.dies = col;
  b.lines[tb.top].push_back({os.id, col, kOpen});
  return {tb.top, os.id, col};
}

CrossbarPlan place_blocks(const GateNetlist& base, const PlannerOptions& opt) {
  if (opt.strict_program_lines)
    throw QcaError("planner",
                   "infeasible placement: circuit needs more than the two "
                   "top/bottom program lines per column; relaxed input-side "
                   "constants are disabled");
  BBuild b;
  b.src = &base;
  b.net.input_order = base.input_order;
  b.net.branch_eliminated = true;

  struct Root {
    BBlock block;
    std::string name;
  };
  std::vector<Root> roots;
  for (int os : base.outputs) {
    BBlock bl = b_emit(b, os);
    roots.push_back({bl, base.signals[os].output_name});
  }
  int n_cols = 0;
  for (const auto& g : b.net.gates)
    if (g.kind != GateKind::Not) n_cols = std::max(n_cols, g.stage + 1);

  // Leaf NOTs consumed as Through push the gate columns right by one.
  int shift = 0;
  for (const auto& pl : b.placed) {
    if (b.net.gates[pl.gate_id].kind != GateKind::Not) continue;
    int t = b.net.gates[pl.gate_id].inputs[0];
    if (b.net.signals[t].origin != SignalOrigin::InputOccurrence) continue;
    int os = b.net.gates[pl.gate_id].output;
    for (const auto& pl2 : b.placed)
      for (const auto& f : pl2.feeds)
        if (f.style == FeedStyle::Through && f.signal == os) shift = 1;
  }

  // Banked leaf inverters keep their tap and landing in the bank column.
  std::set<int> bank_outs, bank_srcs;
  if (shift)
    for (const auto& pl : b.placed) {
      const NetGate& ng = b.net.gates[pl.gate_id];
      if (ng.kind != GateKind::Not) continue;
      if (b.net.signals[ng.inputs[0]].origin != SignalOrigin::InputOccurrence)
        continue;
      bank_outs.insert(ng.output);
      bank_srcs.insert(ng.inputs[0]);
    }

  CrossbarPlan plan;
  plan.from_search = false;
  plan.relaxed_constants = true;
  plan.n_lines = b.next_line;
  int max_gate_col = -1;
  for (const auto& pl : b.placed) {
    const NetGate& ng = b.net.gates[pl.gate_id];
    bool leaf_not =
        ng.kind == GateKind::Not &&
        b.net.signals[ng.inputs[0]].origin == SignalOrigin::InputOccurrence;
    int c = leaf_not && shift ? 0 : pl.column + shift;
    max_gate_col = std::max(max_gate_col, c);
  }
  plan.n_columns = std::max(n_cols + shift, max_gate_col + 1);
  plan.netlist = b.net;
  plan.lines.resize(b.next_line);
  for (int l = 0; l < b.next_line; ++l) {
    PlanLine& line = plan.lines[l];
    line.index = l;
    line.input_occurrence = b.line_input[l];
    for (const auto& sp : b.lines[l]) {
      LineSpan ls;
      ls.signal = sp.signal;
      bool from_input =
          b.net.signals[sp.signal].origin == SignalOrigin::InputOccurrence;
      ls.from_column =
          from_input || bank_outs.count(sp.signal) ? 0 : sp.born + shift;
      ls.to_column = sp.dies == kOpen               ? plan.n_columns
                     : bank_srcs.count(sp.signal) ? 0
                                                  : sp.dies + shift;
      line.timeline.push_back(ls);
    }
  }
  for (const auto& r : roots) {
    plan.lines[r.block.top].output_name = r.name;
    b.net.signals[r.block.sig].is_output = true;
    b.net.signals[r.block.sig].output_name = r.name;
    plan.netlist.signals[r.block.sig].is_output = true;
    plan.netlist.signals[r.block.sig].output_name = r.name;
    plan.netlist.outputs.push_back(r.block.sig);
    for (auto& ls : plan.lines[r.block.top].timeline)
      if (ls.signal == r.block.sig) ls.to_column = plan.n_columns;
  }

  for (const auto& pl : b.placed) {
    PlannedGate g;
    const NetGate& ng = b.net.gates[pl.gate_id];
    g.gate_id = pl.gate_id;
    g.kind = ng.kind;
    g.line = pl.line;
    bool leaf_not =
        ng.kind == GateKind::Not &&
        b.net.signals[ng.inputs[0]].origin == SignalOrigin::InputOccurrence;
    g.column = leaf_not && shift ? pl.column : pl.column + shift;
    if (leaf_not && shift) g.column = 0;
    g.feeds = pl.feeds;
    g.program_source = pl.program_source;
    g.program_value = pl.program_value;
    g.not_mode = pl.not_mode;
    g.not_output = pl.output_line > pl.line ? NotOutput::Down : NotOutput::Up;
    g.output_line = pl.output_line;
    g.output_signal = ng.output;
    plan.gates.push_back(g);
  }
  std::sort(plan.gates.begin(), plan.gates.end(),
            [](const PlannedGate& a, const PlannedGate& b2) {
              if (a.column != b2.column) return a.column < b2.column;
              if (a.line != b2.line) return a.line < b2.line;
              return a.gate_id < b2.gate_id;
            });
  for (size_t i = 0; i < plan.gates.size(); ++i) {
    const PlannedGate& g = plan.gates[i];
    Key k{g.line, g.column};
    if (plan.crosspoints.count(k)) k = {g.output_line, g.column};
    plan.crosspoints[k] = static_cast<int>(i);
  }
  plan.notes.push_back(
      "constructive block placement; shared logic duplicated into a forest");
  return plan;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

CrossbarPlan place(const GateNetlist& netlist, const PlannerOptions& options) {
  if (!netlist.branch_eliminated)
    throw QcaError("planner", "place needs a branch-eliminated netlist");
  // Passthrough-only plans need no search.
  if (netlist.n_gates() == 0) {
    CrossbarPlan plan;
    plan.netlist = netlist;
    plan.n_lines = netlist.n_occurrences();
    plan.n_columns = 0;
    plan.lines.resize(plan.n_lines);
    for (int l = 0; l < plan.n_lines; ++l) {
      int occ = netlist.input_occurrences[l];
      plan.lines[l].index = l;
      plan.lines[l].input_occurrence = occ;
      plan.lines[l].timeline.push_back({occ, 0, 0});
      if (netlist.signals[occ].is_output)
        plan.lines[l].output_name = netlist.signals[occ].output_name;
    }
    plan.notes.push_back("passthrough plan: one straight wire per line");
    return plan;
  }
  CrossbarPlan plan;
  if (try_strategy_search(netlist, options, plan)) return plan;
  return place_blocks(netlist, options);
}

CrossbarPlan place(const Circuit& circuit, const PlannerOptions& options) {
  return place(netlistify(circuit), options);
}

CrossbarPlan program(CrossbarPlan plan, std::pair<int, int> crosspoint,
                     GateKind kind) {
  if (kind != GateKind::And && kind != GateKind::Or)
    throw QcaError("planner", "program accepts AND or OR");
  auto it = plan.crosspoints.find(crosspoint);
  if (it == plan.crosspoints.end())
    throw QcaError("planner", "no gate at cross-point (" +
                                  std::to_string(crosspoint.first) + "," +
                                  std::to_string(crosspoint.second) + ")");
  PlannedGate& g = plan.gates[it->second];
  if (g.kind == GateKind::Not || g.program_value < 0)
    throw QcaError("planner", "cross-point is not a programmable majority gate");
  int value = kind == GateKind::Or ? 1 : 0;
  g.kind = kind;
  g.program_value = value;
  for (auto& f : g.feeds)
    if (f.style == FeedStyle::ProgramArm || f.style == FeedStyle::ConstFeed ||
        f.style == FeedStyle::ConstArm)
      f.const_value = value;
  plan.netlist.gates[g.gate_id].kind = kind;
  return plan;
}

std::vector<std::string> check_plan(const CrossbarPlan& plan) {
  std::vector<std::string> bad;
  const GateNetlist& net = plan.netlist;
  int occ = plan.realized_occurrences();
  int nn = plan.realized_not_gates();
  if (!(occ <= plan.n_lines && plan.n_lines <= occ + nn))
    bad.push_back("line count " + std::to_string(plan.n_lines) +
                  " outside [" + std::to_string(occ) + "," +
                  std::to_string(occ + nn) + "]");
  int stages = plan.realized_stages();
  // Leading and trailing inverter banks may each add one column past the
  // one-gate-per-column worst case.
  int gates = net.n_gates() + 2;
  if (net.n_gates() > 0 && !(stages <= plan.n_columns && plan.n_columns <= gates))
    bad.push_back("column count " + std::to_string(plan.n_columns) +
                  " outside [" + std::to_string(stages) + "," +
                  std::to_string(gates) + "]");
  for (const auto& g : plan.gates)
    if (g.column < 0 || g.column >= plan.n_columns)
      bad.push_back("gate " + std::to_string(g.gate_id) + " at column " +
                    std::to_string(g.column) + " outside the plan");

  std::set<Key> seen;
  for (const auto& [key, gi] : plan.crosspoints) {
    (void)gi;
    if (!seen.insert(key).second) bad.push_back("duplicate cross-point");
  }

  // Input rows ending at a leaf inverter pattern free their column's arm slot.
  std::set<std::pair<int, int>> leaf_rows;
  for (const auto& g : plan.gates)
    if (g.kind == GateKind::Not &&
        net.signals[net.gates[g.gate_id].inputs[0]].origin ==
            SignalOrigin::InputOccurrence)
      leaf_rows.insert({g.line, g.column});

  auto occupied_at = [&](int c) {
    std::set<int> occ_lines;
    for (const auto& line : plan.lines)
      for (const auto& sp : line.timeline)
        if (sp.from_column <= c && c <= sp.to_column &&
            !(sp.to_column == c && leaf_rows.count({line.index, c})))
          occ_lines.insert(line.index);
    for (const auto& g : plan.gates)
      if (g.column == c) occ_lines.insert(g.line);
    return occ_lines;
  };

  std::map<int, int> top_uses, bottom_uses;
  for (const auto& g : plan.gates) {
    if (g.program_source == ProgramSource::Top ||
        g.program_source == ProgramSource::Bottom) {
      auto occ_lines = occupied_at(g.column);
      bool bottom = g.program_source == ProgramSource::Bottom;
      int extreme = bottom ? *occ_lines.rbegin() : *occ_lines.begin();
      if (g.line != extreme)
        bad.push_back("gate " + std::to_string(g.gate_id) +
                      " programs from the " + (bottom ? "bottom" : "top") +
                      " but is not on that extreme line of column " +
                      std::to_string(g.column));
      int& uses = bottom ? bottom_uses[g.column] : top_uses[g.column];
      if (++uses > 1) bad.push_back("program line used twice in one column");
    }
    // Monotone flow: every signal feed was born at or before this column.
    for (const auto& f : g.feeds) {
      if (f.signal < 0) continue;
      const NetSignal& s = net.signals[f.signal];
      if (s.origin != SignalOrigin::GateOutput) continue;
      for (const auto& g2 : plan.gates)
        if (g2.output_signal == f.signal && g2.column > g.column)
          bad.push_back("signal flows backwards into gate " +
                        std::to_string(g.gate_id));
    }
    // Corridor clearance for arms.
    for (const auto& f : g.feeds) {
      if (f.style != FeedStyle::SideArm && f.style != FeedStyle::InvertedArm)
        continue;
      int lo = std::min(g.line, f.source_line), hi = std::max(g.line, f.source_line);
      for (int l = lo + 1; l < hi; ++l)
        for (const auto& sp : plan.lines[l].timeline)
          if (sp.from_column <= g.column && g.column <= sp.to_column &&
              sp.to_column > g.column)
            bad.push_back("arm of gate " + std::to_string(g.gate_id) +
                          " crosses live line " + std::to_string(l));
    }
  }
  return bad;
}

std::string plan_to_text(const CrossbarPlan& plan) {
  std::ostringstream os;
  os << "crossbar " << plan.n_lines << " lines x " << plan.n_columns
     << " columns\n";
  const GateNetlist& net = plan.netlist;
  auto signame = [&](int s) -> std::string {
    if (s < 0) return "-";
    const NetSignal& sig = net.signals[s];
    if (!sig.label.empty()) return sig.label;
    if (sig.origin == SignalOrigin::InputOccurrence) return sig.input_name;
    if (sig.origin == SignalOrigin::GateOutput) return "g" + std::to_string(sig.gate_id);
    return "const";
  };
  for (const auto& line : plan.lines) {
    os << "line " << line.index << ":";
    if (line.input_occurrence >= 0) os << " input " << signame(line.input_occurrence);
    if (line.input_const >= 0) os << " const " << line.input_const;
    for (const auto& sp : line.timeline)
      os << "  " << signame(sp.signal) << "[" << sp.from_column << ".."
         << sp.to_column << "]";
    if (!line.output_name.empty()) os << "  -> " << line.output_name;
    os << "\n";
  }
  auto kindname = [](const PlannedGate& g) -> std::string {
    switch (g.kind) {
      case GateKind::And: return "AND";
      case GateKind::Or: return "OR";
      case GateKind::Maj3: return "MAJ";
      case GateKind::Not: return "NOT";
    }
    return "?";
  };
  for (const auto& g : plan.gates) {
    os << "gate " << kindname(g) << " @(" << g.line << "," << g.column << ")";
    for (const auto& f : g.feeds) {
      os << " ";
      switch (f.style) {
        case FeedStyle::Through: os << "through:" << signame(f.signal); break;
        case FeedStyle::SideArm:
          os << "arm:" << signame(f.signal) << "@l" << f.source_line;
          break;
        case FeedStyle::InvertedArm:
          os << "inv-arm:" << signame(f.signal) << "@l" << f.source_line;
          break;
        case FeedStyle::ConstFeed: os << "const-feed:" << f.const_value; break;
        case FeedStyle::ConstArm: os << "const-arm:" << f.const_value; break;
        case FeedStyle::ProgramArm:
          os << (f.from_above ? "program-top:" : "program-bottom:")
             << f.const_value;
          break;
      }
    }
    if (g.kind == GateKind::Not) {
      os << (g.not_mode == NotMode::Jog
                 ? " jog"
                 : (g.not_mode == NotMode::LandDead ? " land-dead" : " land-fresh"));
      os << "->l" << g.output_line;
    }
    os << "\n";
  }
  for (const auto& note : plan.notes) os << "note: " << note << "\n";
  return os.str();
}

std::string plan_to_json(const CrossbarPlan& plan) {
  nlohmann::json j;
  j["n_lines"] = plan.n_lines;
  j["n_columns"] = plan.n_columns;
  j["relaxed_constants"] = plan.relaxed_constants;
  j["from_search"] = plan.from_search;
  auto& jl = j["lines"] = nlohmann::json::array();
  for (const auto& line : plan.lines) {
    nlohmann::json e;
    e["index"] = line.index;
    if (line.input_occurrence >= 0)
      e["input"] = plan.netlist.signals[line.input_occurrence].input_name;
    if (!line.output_name.empty()) e["output"] = line.output_name;
    auto& spans = e["timeline"] = nlohmann::json::array();
    for (const auto& sp : line.timeline)
      spans.push_back({{"signal", sp.signal},
                       {"from", sp.from_column},
                       {"to", sp.to_column}});
    jl.push_back(e);
  }
  auto& jg = j["gates"] = nlohmann::json::array();
  for (const auto& g : plan.gates) {
    nlohmann::json e;
    e["kind"] = static_cast<int>(g.kind);
    e["line"] = g.line;
    e["column"] = g.column;
    e["program_value"] = g.program_value;
    e["program_source"] = static_cast<int>(g.program_source);
    jg.push_back(e);
  }
  j["notes"] = plan.notes;
  return j.dump(2);
}

}  // namespace qcaforge
