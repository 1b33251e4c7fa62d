#include "qcaforge/layout.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qcaforge/netlist.hpp"
#include "qcaforge/planner.hpp"

// Lowering turns a crossbar plan into concrete cells. Geometry conventions:
// signal line l sits on row 3*(l+1); the two rows between lines hold arm and
// inverter-pattern cells, the outermost rows (0 and 3*(n_lines+1)) are the
// program lines. Device columns land on x = 4 + (spacing+1)*k, so exactly
// `spacing` wire cells separate neighbouring cross-points, and the two cells
// left of a device form its approach. A leading column holding only
// input-side inverters is a narrow bank at x=2..3 instead of a full column.
//
// Each cell records the upstream cell that drives it plus a cumulative phase.
// Phases follow the dataflow: a straight run of more than spacing+1 wire
// cells starts the next zone, and a device fires one phase after its latest
// input has settled. The through wire and the corner cell of each side arm
// hold one phase before the gate; the arm cells between corner and gate
// switch with the gate itself, so the settled corner drives them and stray
// diagonal pickup from crossing wires cannot seed the arm first. Feeds that
// settle early are re-segmented toward the gate two cells at a time -- a
// zone segment of a single cell drops its state the moment its upstream
// zone releases -- and the output cell of a gate-driven net latches one
// phase after its wire. Clock zone = phase mod 4.

namespace qcaforge {

namespace {

using Pos = std::pair<int, int>;

struct Proto {
  CellRole role = CellRole::Normal;
  double fixed_pol = 0.0;
  bool rotated = false;
  std::string label;
  int net = -1;
  Pos driver{-1, -1};
  bool has_driver = false;
  int group = -1;      // inverter pattern id; group cells share one zone
  Pos anchor{-1, -1};  // bystander cells: phase = anchor phase + 2
  bool has_anchor = false;
  // Gate-produced outputs latch one phase after their wire. The step is taken
  // on the cell before the output so the latched pair holds itself: a lone
  // cell in a zone loses its state the moment its upstream zone releases.
  bool latch_step = false;
  // phase solver state
  bool done = false;
  int phase = 0;
  int dir = 0;  // 1 horizontal, 2 vertical, 3 diagonal
  int run = 0;  // straight wire cells so far in this zone segment
};

struct FeedWork {
  Pos anchor;              // last settled cell of the feed; holds while the gate fires
  std::vector<Pos> verts;  // arm cells anchor-side first, phased with the gate
};

struct DeviceWork {
  Pos pos;
  std::vector<FeedWork> feeds;
  std::vector<Pos> backfill_heads;  // program/constant chains, phased last
};

class Lowering {
 public:
  Lowering(const CrossbarPlan& plan, const Geometry& geom) : p_(plan), g_(geom) {
    if (g_.spacing < 5 || g_.spacing > 7)
      throw QcaError("layout", "spacing must be 5..7, got " + std::to_string(g_.spacing));
    thresh_ = g_.spacing + 1;
  }

  CellGrid build() {
    classify_columns();
    collect_uses();
    for (const auto& ln : p_.lines) emit_line(ln);
    for (const auto& gt : p_.gates) emit_gate(gt);
    weaken_throughs();
    solve_phases();
    return finalize();
  }

 private:
  int row(int line) const { return 3 * (line + 1); }
  int bottom_row() const { return 3 * (p_.n_lines + 1); }
  int dev_x(int column) const { return 4 + (g_.spacing + 1) * (column - n_banks_); }
  int ctr_x(int column) const { return column < n_banks_ ? 2 : dev_x(column) - 2; }

  void classify_columns() {
    n_banks_ = 0;
    for (int c = 0; c < p_.n_columns; ++c) {
      bool any = false, all_leaf = true;
      for (const auto& gt : p_.gates)
        if (gt.column == c) {
          any = true;
          bool leaf = gt.kind == GateKind::Not && !gt.feeds.empty() &&
                      gt.feeds[0].signal >= 0 &&
                      p_.netlist.signals[gt.feeds[0].signal].origin ==
                          SignalOrigin::InputOccurrence;
          if (!leaf) all_leaf = false;
        }
      if (!(any && all_leaf)) break;
      ++n_banks_;
    }
    n_dev_ = p_.n_columns - n_banks_;
    if (p_.gates.empty())
      x_out_ = g_.spacing - 1;  // plain wires: input pair plus a short run
    else if (n_dev_ == 0)
      x_out_ = 6;  // inverters only: short run past the bank
    else
      x_out_ = dev_x(p_.n_columns - 1) + 3;
  }

  // Where each signal is consumed, by column, to pick span endpoints.
  void collect_uses() {
    for (const auto& gt : p_.gates) {
      if (gt.kind == GateKind::Not) {
        if (!gt.feeds.empty() && gt.feeds[0].signal >= 0)
          uses_[gt.feeds[0].signal].push_back({gt.column, FeedStyle::Through, true});
        continue;
      }
      for (const auto& f : gt.feeds)
        if (f.signal >= 0 && (f.style == FeedStyle::Through ||
                              f.style == FeedStyle::SideArm ||
                              f.style == FeedStyle::InvertedArm))
          uses_[f.signal].push_back({gt.column, f.style, false});
    }
  }

  void emit(Pos pos, Proto pr) {
    if (cells_.count(pos))
      throw QcaError("layout", "two cells collide at (" + std::to_string(pos.first) +
                                   "," + std::to_string(pos.second) + ")");
    if (pr.has_driver) children_[pr.driver].push_back(pos);
    cells_.emplace(pos, std::move(pr));
  }

  // Horizontal wire cells x0..x1 on row r, chained left to right.
  void wire_h(int r, int x0, int x1, int net, Pos driver) {
    for (int x = x0; x <= x1; ++x) {
      Proto pr;
      pr.net = net;
      pr.driver = driver;
      pr.has_driver = driver.first >= 0;
      emit({r, x}, pr);
      driver = {r, x};
    }
  }

  struct Use {
    int column;
    FeedStyle style;
    bool tap;
  };

  // End x of a consumption at `column` for span bookkeeping.
  int use_end_x(const Use& u) const {
    if (u.tap) return ctr_x(u.column);
    if (u.style == FeedStyle::SideArm) return dev_x(u.column);
    return dev_x(u.column) - 1;  // through and jog stop short of the device
  }

  void emit_line(const PlanLine& ln) {
    int r = row(ln.index);
    if (ln.input_occurrence >= 0) {
      Proto head;
      head.role = CellRole::Input;
      head.label = p_.netlist.signals[ln.input_occurrence].input_name;
      head.net = ln.input_occurrence;
      emit({r, 0}, head);
      Proto second;
      second.net = ln.input_occurrence;
      second.driver = {r, 0};
      second.has_driver = true;
      emit({r, 1}, second);
    }
    for (const auto& sp : ln.timeline) emit_span(ln, sp, r);
  }

  void emit_span(const PlanLine& ln, const LineSpan& sp, int r) {
    int bx = 0;
    Pos driver{-1, -1};
    int net = sp.signal;
    if (sp.signal == -2) {
      // Constant fed from the input side; the value is on the gate's feed.
      Proto fx;
      fx.role = CellRole::Fixed;
      fx.fixed_pol = const_feed_value(ln.index, sp.from_column) ? 1.0 : -1.0;
      emit({r, 0}, fx);
      bx = 1;
      driver = {r, 0};
      net = -1;
    } else {
      const NetSignal& sig = p_.netlist.signals[sp.signal];
      if (sig.origin == SignalOrigin::InputOccurrence) {
        bx = 2;
        driver = {r, 1};
      } else {
        const PlannedGate* producer = gate_for_output(sp.signal);
        if (!producer)
          throw QcaError("layout", "span of signal " + std::to_string(sp.signal) +
                                       " has no producer");
        if (producer->kind == GateKind::Not) {
          int cx = ctr_x(producer->column);
          bx = cx + 2;
          driver = {r, cx + 1};  // pattern exit cell
        } else {
          bx = dev_x(producer->column) + 1;
          driver = {r, dev_x(producer->column)};
        }
      }
    }

    int ex;
    bool is_output = sp.to_column >= p_.n_columns;
    if (is_output) {
      ex = x_out_ - 1;
    } else {
      ex = -1;
      auto it = uses_.find(sp.signal);
      if (it != uses_.end())
        for (const auto& u : it->second)
          if (u.column == sp.to_column) ex = std::max(ex, use_end_x(u));
      if (ex < 0)
        throw QcaError("layout", "span of signal " + std::to_string(sp.signal) +
                                     " ends unconsumed at column " +
                                     std::to_string(sp.to_column));
    }
    wire_h(r, bx, ex, net, driver);
    if (is_output) {
      bool gate_born = sp.signal >= 0 && p_.netlist.signals[sp.signal].origin ==
                                             SignalOrigin::GateOutput;
      if (gate_born && ex >= bx) cells_.at({r, ex}).latch_step = true;
      Proto out;
      out.role = CellRole::Output;
      out.label = ln.output_name;
      out.net = net;
      out.driver = ex >= bx ? Pos{r, ex} : driver;
      out.has_driver = true;
      emit({r, x_out_}, out);
    }
  }

  bool const_feed_value(int line, int column) const {
    for (const auto& gt : p_.gates)
      if (gt.line == line && gt.column == column)
        for (const auto& f : gt.feeds)
          if (f.style == FeedStyle::ConstFeed) return f.const_value != 0;
    throw QcaError("layout", "constant segment without a consuming gate");
  }

  const PlannedGate* gate_for_output(int signal) const {
    for (const auto& gt : p_.gates)
      if (gt.output_signal == signal) return &gt;
    return nullptr;
  }

  void emit_gate(const PlannedGate& gt) {
    if (gt.kind == GateKind::Not) {
      emit_not(gt);
      return;
    }
    int r = row(gt.line), dx = dev_x(gt.column);
    DeviceWork work;
    work.pos = {r, dx};

    Proto dev;
    dev.role = CellRole::Device;
    dev.net = gt.output_signal;
    dev.driver = {r, dx - 1};
    dev.has_driver = true;
    bool through_is_signal = false;

    for (const auto& f : gt.feeds) {
      switch (f.style) {
        case FeedStyle::Through: {
          FeedWork fw;
          fw.anchor = {r, dx - 1};
          work.feeds.push_back(std::move(fw));
          through_is_signal = true;
          break;
        }
        case FeedStyle::SideArm: {
          int rs = row(f.source_line);
          int step = rs < r ? 1 : -1;
          FeedWork fw;
          fw.anchor = {rs, dx};  // corner cell, owned by the source span
          Pos prev = fw.anchor;
          for (int rr = rs + step; rr != r; rr += step) {
            Proto arm;
            arm.net = f.signal;
            arm.driver = prev;
            arm.has_driver = true;
            emit({rr, dx}, arm);
            prev = {rr, dx};
            fw.verts.push_back(prev);
          }
          work.feeds.push_back(std::move(fw));
          break;
        }
        case FeedStyle::InvertedArm: {
          // Jog inverter: the wire ends one short of the column and the seed
          // cell sits diagonally, flipping the sign on the way to the device.
          if (f.source_line != gt.line - 1 && f.source_line != gt.line + 1)
            throw QcaError("layout", "jog needs an adjacent source line");
          int rs = row(f.source_line);
          int step = rs < r ? 1 : -1;
          FeedWork fw;
          fw.anchor = {rs, dx - 1};
          Proto seed;
          seed.net = f.signal;
          seed.driver = fw.anchor;
          seed.has_driver = true;
          emit({rs + step, dx}, seed);
          Proto second;
          second.net = f.signal;
          second.driver = {rs + step, dx};
          second.has_driver = true;
          emit({rs + 2 * step, dx}, second);
          fw.verts.push_back({rs + step, dx});
          fw.verts.push_back({rs + 2 * step, dx});
          work.feeds.push_back(std::move(fw));
          break;
        }
        case FeedStyle::ConstFeed:
          break;  // the span pass laid the wire; phased with the gate
        case FeedStyle::ConstArm: {
          Proto fx;
          fx.role = CellRole::Fixed;
          fx.fixed_pol = f.const_value ? 1.0 : -1.0;
          Pos at{f.from_above ? r - 1 : r + 1, dx};
          emit(at, fx);
          work.backfill_heads.push_back(at);
          break;
        }
        case FeedStyle::ProgramArm: {
          bool top = f.from_above;
          int pr = top ? 0 : bottom_row();
          Proto fx;
          fx.role = CellRole::Fixed;
          fx.fixed_pol = gt.program_value ? 1.0 : -1.0;
          emit({pr, dx}, fx);
          int step = top ? 1 : -1;
          Pos prev{pr, dx};
          for (int rr = pr + step; rr != r; rr += step) {
            Proto arm;
            arm.driver = prev;
            arm.has_driver = true;
            emit({rr, dx}, arm);
            prev = {rr, dx};
          }
          work.backfill_heads.push_back(prev);
          break;
        }
      }
    }
    if (gt.feeds.empty() || work.feeds.empty())
      throw QcaError("layout", "device without signal feeds");
    if (!through_is_signal) {
      // Constant through: point the device at a real signal for delay walks.
      const FeedWork& first = work.feeds.front();
      dev.driver = first.verts.empty() ? first.anchor : first.verts.back();
      // Constant wire cells behind the device are phased one ahead of it.
      work.backfill_heads.push_back({r, dx - 1});
    }
    emit({r, dx}, dev);
    devices_.push_back(std::move(work));
  }

  // Nine-cell inverter pattern centred on the landing row: the signal runs
  // tap -> two cells between the lines -> diagonal hop to the exit cell on
  // the landing row. The five remaining cells are bystanders two zones away,
  // so they sit unpolarized while the four signal cells switch.
  void emit_not(const PlannedGate& gt) {
    if (gt.output_line != gt.line - 1 && gt.output_line != gt.line + 1)
      throw QcaError("layout", "inverter must land on an adjacent line");
    int rs = row(gt.line), rl = row(gt.output_line);
    int cx = ctr_x(gt.column);
    int step = rl > rs ? 1 : -1;
    int gid = next_group_++;

    Pos tap{rs, cx};
    Pos s1{rs + step, cx}, s2{rs + 2 * step, cx}, exit{rl, cx + 1};
    Proto a;
    a.net = gt.output_signal;
    a.driver = tap;
    a.has_driver = true;
    a.group = gid;
    emit(s1, a);
    Proto b;
    b.net = gt.output_signal;
    b.driver = s1;
    b.has_driver = true;
    b.group = gid;
    emit(s2, b);
    Proto c;  // diagonal neighbour of s2: this hop inverts
    c.net = gt.output_signal;
    c.driver = s2;
    c.has_driver = true;
    c.group = gid;
    emit(exit, c);

    const Pos bystanders[5] = {Pos{rl, cx}, Pos{rl, cx - 1}, Pos{rl, cx - 2},
                               Pos{rl + step, cx}, Pos{rl + 2 * step, cx}};
    for (const Pos& at : bystanders) {
      Proto by;
      by.anchor = exit;
      by.has_anchor = true;
      emit(at, by);
    }
  }

  bool wireish(const Proto& pr) const {
    return pr.role == CellRole::Normal || pr.role == CellRole::Input;
  }

  // The last two cells of a straight approach step one row aside and back,
  // so the cell beside the device hangs off its wire through diagonal
  // contacts only, like an inverter exit. When both programmed side feeds
  // agree, the through value is redundant by majority and the polarizing
  // device overwrites a stale approach cell instead of fighting it across
  // the cross-point; the double hop keeps the sign and the weak contacts
  // stop the overwrite from travelling back up the wire. When the side
  // feeds cancel, the approach still decides the gate unopposed. Cell count
  // is unchanged: the straight cell moves to the flank.
  void weaken_throughs() {
    for (const auto& dv : devices_) {
      Pos anchor{dv.pos.first, dv.pos.second - 1};
      Pos mid{dv.pos.first, dv.pos.second - 2};
      Pos wire{dv.pos.first, dv.pos.second - 3};
      auto ac = cells_.find(anchor);
      auto mc = cells_.find(mid);
      if (ac == cells_.end() || mc == cells_.end() || !cells_.count(wire)) continue;
      if (!wireish(ac->second) || !wireish(mc->second)) continue;
      if (!ac->second.has_driver || ac->second.driver != mid) continue;
      if (!mc->second.has_driver || mc->second.driver != wire) continue;
      if (children_[mid].size() != 1) continue;
      Pos dip{dv.pos.first + 1, mid.second};
      if (cells_.count(dip)) dip.first = dv.pos.first - 1;
      if (cells_.count(dip)) continue;  // both flanks busy: keep the straight run
      Proto dp;
      dp.net = mc->second.net;
      dp.driver = wire;
      dp.has_driver = true;
      cells_.erase(mc);
      auto& kids = children_[wire];
      kids.erase(std::remove(kids.begin(), kids.end(), mid), kids.end());
      children_.erase(mid);
      ac->second.driver = dip;
      children_[dip].push_back(anchor);
      emit(dip, std::move(dp));
    }
  }

  static int direction(Pos from, Pos to) {
    if (from.first == to.first) return 1;
    if (from.second == to.second) return 2;
    return 3;
  }

  void solve(Pos at) {
    Proto& c = cells_.at(at);
    if (c.done) return;
    if (!c.has_driver) {
      if (c.has_anchor) {
        solve(c.anchor);
        c.phase = cells_.at(c.anchor).phase + 2;
      } else {
        c.phase = 0;
        c.dir = 1;
        c.run = wireish(c) ? 1 : 0;
      }
      c.done = true;
      return;
    }
    if (!cells_.count(c.driver))
      throw QcaError("layout", "dangling driver at (" + std::to_string(at.first) +
                                   "," + std::to_string(at.second) + ")");
    solve(c.driver);
    const Proto& d = cells_.at(c.driver);
    if (c.role == CellRole::Output) {
      c.phase = d.phase;
      c.done = true;
      return;
    }
    int dir = direction(c.driver, at);
    int base = (wireish(d) && d.dir == dir) ? d.run : 0;
    c.phase = d.phase;
    c.run = base + 1;
    c.dir = dir;
    if (wireish(c) && c.run > thresh_) {
      ++c.phase;
      c.run = 1;
    }
    if (c.latch_step && c.phase == d.phase) {
      ++c.phase;
      c.run = 1;
    }
    c.done = true;
  }

  // Raise a feed that settles early so its last cell holds one phase before
  // the gate fires. Walking upstream, each raised phase covers at least two
  // cells, because a lone cell in a zone cannot keep its state while the
  // zone upstream of it releases. Inverter patterns shift as one unit.
  void bump(Pos head, int target) {
    int value = target;
    int filled = 0;
    Pos cur = head;
    std::set<Pos> raised;
    std::vector<Pos> order;
    while (true) {
      Proto& c = cells_.at(cur);
      std::vector<Pos> item{cur};
      if (c.group >= 0) {
        Pos walk = cur;
        while (cells_.at(walk).has_driver) {
          Pos up = cells_.at(walk).driver;
          if (!cells_.count(up) || cells_.at(up).group != c.group) break;
          item.push_back(up);
          walk = up;
        }
      }
      int old = cells_.at(item.back()).phase;
      if (old >= value) break;
      for (const Pos& at : item) {
        Proto& pc = cells_.at(at);
        if (!wireish(pc))
          throw QcaError("layout", "cannot re-segment feed for synchronization");
        // A consumer already phased off the old value would end up driven
        // backwards; only branches not yet solved can absorb the shift.
        for (const Pos& k : children_[at]) {
          const Proto& kc = cells_.at(k);
          if (kc.role == CellRole::Device || raised.count(k) || !kc.done) continue;
          if (kc.phase < value)
            throw QcaError("layout", "cannot re-segment feed for synchronization");
        }
        pc.phase = value;
        raised.insert(at);
        order.push_back(at);
      }
      filled += static_cast<int>(item.size());
      if (filled >= 2) {
        --value;
        filled = 0;
      }
      if (!cells_.at(item.back()).has_driver) break;
      cur = cells_.at(item.back()).driver;
    }
    // Straight-run counters restart where the raise opened a new segment.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Proto& pc = cells_.at(*it);
      if (!pc.has_driver || !cells_.count(pc.driver)) continue;
      const Proto& d = cells_.at(pc.driver);
      int dir = direction(pc.driver, *it);
      int base = (wireish(d) && d.dir == dir && d.phase == pc.phase) ? d.run : 0;
      pc.run = base + 1;
      pc.dir = dir;
    }
  }

  // Program and constant chains take their phase from the gate they feed,
  // splitting backwards so every forward run stays within the limit.
  void backfill(Pos head, int phase) {
    int p = phase, run = 1;
    Pos cur = head;
    while (true) {
      Proto& c = cells_.at(cur);
      c.phase = std::max(p, 0);
      c.done = true;
      if (!c.has_driver) break;
      cur = c.driver;
      if (++run > thresh_) {
        --p;
        run = 1;
      }
    }
  }

  void solve_phases() {
    std::stable_sort(devices_.begin(), devices_.end(),
                     [](const DeviceWork& a, const DeviceWork& b) {
                       return a.pos.second < b.pos.second;
                     });
    for (const auto& dv : devices_) {
      // Every feed chain ends in a cell adjacent to the device held one
      // phase earlier, so all three votes are present at full strength for
      // the whole switch quarter. A chain of corner plus k risers spans
      // ceil((k+1)/thresh) zones, segmented from the device side so the
      // segment beside the device is never a short one.
      int top = 0;
      for (const auto& f : dv.feeds) {
        solve(f.anchor);
        int k = static_cast<int>(f.verts.size());
        top = std::max(top, cells_.at(f.anchor).phase + k / thresh_);
      }
      Proto& dev = cells_.at(dv.pos);
      dev.phase = top + 1;
      dev.dir = 1;
      dev.run = 0;
      dev.done = true;
      for (const auto& f : dv.feeds) {
        int k = static_cast<int>(f.verts.size());
        int q = dev.phase - 1 - k / thresh_;
        if (cells_.at(f.anchor).phase < q) bump(f.anchor, q);
        int prev = -1, run = 0;
        for (int i = 0; i < k; ++i) {
          Proto& vc = cells_.at(f.verts[i]);
          vc.phase = dev.phase - 1 - (k - 1 - i) / thresh_;
          run = vc.phase == prev ? run + 1 : 1;
          prev = vc.phase;
          vc.dir = 2;
          vc.run = run;
          vc.done = true;
        }
      }
      // Program and constant chains end beside the device as well; their
      // far end is a fixed cell that never releases.
      for (const Pos& h : dv.backfill_heads) backfill(h, dev.phase - 1);
    }
    for (auto& [pos, pr] : cells_) {
      (void)pr;
      solve(pos);
    }
    heal_segments();
    for (auto& [pos, pr] : cells_) {
      (void)pos;
      if (pr.has_anchor) pr.phase = cells_.at(pr.anchor).phase + 2;
    }
  }

  int segment_size(Pos at, int cap) const {
    // Cells reachable over driver links without changing phase.
    int phase = cells_.at(at).phase;
    std::set<Pos> seen;
    std::vector<Pos> frontier{at};
    while (!frontier.empty() && static_cast<int>(seen.size()) < cap) {
      Pos cur = frontier.back();
      frontier.pop_back();
      if (!seen.insert(cur).second) continue;
      const Proto& c = cells_.at(cur);
      if (c.has_driver && cells_.count(c.driver) &&
          cells_.at(c.driver).phase == phase)
        frontier.push_back(c.driver);
      auto it = children_.find(cur);
      if (it != children_.end())
        for (const Pos& k : it->second)
          if (cells_.at(k).phase == phase) frontier.push_back(k);
    }
    return static_cast<int>(seen.size());
  }

  // Splitting a straight run can strand a single cell in its own zone right
  // where the run ends; pull the upstream neighbour in so the pair can hold
  // itself, as long as the donor segment keeps two cells of its own.
  void heal_segments() {
    for (int pass = 0; pass < 16; ++pass) {
      bool changed = false;
      Pos worst{-1, -1};
      for (auto& [pos, c] : cells_) {
        if (c.net < 0 || !c.has_driver) continue;
        if (c.role == CellRole::Fixed || c.role == CellRole::Input) continue;
        Proto& d = cells_.at(c.driver);
        if (d.phase == c.phase) continue;
        bool joined = false;
        auto it = children_.find(pos);
        if (it != children_.end())
          for (const Pos& k : it->second)
            if (cells_.at(k).phase == c.phase) joined = true;
        if (joined) continue;
        bool ok = wireish(d) && d.group < 0 && d.phase == c.phase - 1 &&
                  segment_size(c.driver, 3) >= 3;
        if (ok)
          for (const Pos& k : children_[c.driver])
            if (k != pos && cells_.at(k).phase < c.phase) ok = false;
        if (!ok) {
          worst = pos;
          continue;
        }
        d.phase = c.phase;
        changed = true;
      }
      if (!changed) {
        if (worst.first >= 0)
          throw QcaError("layout",
                         "lone zone segment at (" + std::to_string(worst.first) +
                             "," + std::to_string(worst.second) + ")");
        return;
      }
    }
    throw QcaError("layout", "zone segment repair did not settle");
  }

  CellGrid finalize() {
    CellGrid grid;
    grid.geom = g_;
    std::map<Pos, int> idx;
    int n = 0;
    for (const auto& [pos, pr] : cells_) {
      (void)pr;
      idx[pos] = n++;
    }
    for (const auto& [pos, pr] : cells_) {
      QcaCell c;
      c.row = pos.first;
      c.col = pos.second;
      c.role = pr.role;
      c.fixed_polarization = pr.fixed_pol;
      c.rotated = pr.rotated;
      c.label = pr.label;
      c.net_id = pr.net;
      c.phase = pr.phase;
      c.zone = pr.phase % 4;
      if (pr.has_driver) {
        auto it = idx.find(pr.driver);
        if (it == idx.end())
          throw QcaError("layout", "dangling driver at (" + std::to_string(pos.first) +
                                       "," + std::to_string(pos.second) + ")");
        c.driver_index = it->second;
      }
      grid.add(std::move(c));
    }
    return grid;
  }

  const CrossbarPlan& p_;
  Geometry g_;
  int thresh_ = 7;
  int n_banks_ = 0;
  int n_dev_ = 0;
  int x_out_ = 0;
  int next_group_ = 0;
  std::map<Pos, Proto> cells_;
  std::map<Pos, std::vector<Pos>> children_;
  std::map<int, std::vector<Use>> uses_;
  std::vector<DeviceWork> devices_;
};

}  // namespace

double CellGrid::area_um2() const {
  if (cells.empty()) return 0.0;
  int r0 = cells[0].row, r1 = r0, c0 = cells[0].col, c1 = c0;
  for (const auto& c : cells) {
    r0 = std::min(r0, c.row);
    r1 = std::max(r1, c.row);
    c0 = std::min(c0, c.col);
    c1 = std::max(c1, c.col);
  }
  double h = (r1 - r0) * geom.pitch_nm + geom.cell_size_nm;
  double w = (c1 - c0) * geom.pitch_nm + geom.cell_size_nm;
  return h * w * 1e-6;
}

CellGrid lower(const CrossbarPlan& plan, const Geometry& geom) {
  return Lowering(plan, geom).build();
}

CellGrid assign_clocks(CellGrid grid, const CrossbarPlan& plan) {
  (void)plan;  // timing depends only on the recorded phases, not the program
  for (auto& c : grid.cells) c.zone = ((c.phase % 4) + 4) % 4;
  return grid;
}

std::map<std::string, int> delay_in_phases(const CellGrid& grid) {
  std::map<std::string, int> out;
  for (int id : grid.output_cells) {
    int transitions = 0;
    int cur = id;
    std::set<int> seen;
    while (grid.cells[cur].driver_index >= 0 && seen.insert(cur).second) {
      int up = grid.cells[cur].driver_index;
      if (grid.cells[cur].zone == (grid.cells[up].zone + 1) % 4) ++transitions;
      cur = up;
    }
    out[grid.cells[id].label] = transitions;
  }
  return out;
}

std::vector<std::string> check_grid(const CellGrid& grid) {
  std::vector<std::string> bad;
  auto spot = [](const QcaCell& c) {
    return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
  };

  // Zones step by 0 or +1 along every driver chain.
  for (const auto& c : grid.cells) {
    if (c.driver_index < 0) continue;
    const QcaCell& d = grid.cells[c.driver_index];
    int diff = ((c.zone - d.zone) % 4 + 4) % 4;
    if (diff > 1)
      bad.push_back("zone jumps " + std::to_string(d.zone) + "->" +
                    std::to_string(c.zone) + " into " + spot(c));
  }

  // No straight same-zone wire run longer than spacing+1 cells along the
  // signal flow; a corner or an inverter hop starts a fresh run.
  int limit = grid.geom.spacing + 1;
  auto wire = [](const QcaCell& c) {
    return c.role == CellRole::Normal || c.role == CellRole::Input;
  };
  auto dir_of = [&](int i) {
    int d = grid.cells[i].driver_index;
    if (d < 0) return 1;
    int dr = grid.cells[i].row - grid.cells[d].row;
    int dc = grid.cells[i].col - grid.cells[d].col;
    return dr == 0 ? 1 : dc == 0 ? 2 : 3;
  };
  std::vector<int> runlen(grid.cells.size(), -1);
  auto run_of = [&](auto&& self, int i) -> int {
    if (runlen[i] >= 0) return runlen[i];
    const QcaCell& c = grid.cells[i];
    if (!wire(c)) return runlen[i] = 0;
    int d = c.driver_index;
    if (d < 0) return runlen[i] = 1;
    const QcaCell& dc = grid.cells[d];
    bool chained = wire(dc) && dc.zone == c.zone && dir_of(d) == dir_of(i);
    return runlen[i] = chained ? self(self, d) + 1 : 1;
  };
  for (int i = 0; i < static_cast<int>(grid.cells.size()); ++i)
    if (run_of(run_of, i) == limit + 1)
      bad.push_back("wire run over " + std::to_string(limit) + " cells at " +
                    spot(grid.cells[i]));

  // A zone segment needs at least two cells to hold its value: a lone cell
  // is overwhelmed the moment the zone driving it releases. Fixed and input
  // cells are pinned externally and may stand alone.
  std::vector<std::vector<int>> kids(grid.cells.size());
  for (int i = 0; i < static_cast<int>(grid.cells.size()); ++i)
    if (grid.cells[i].driver_index >= 0)
      kids[grid.cells[i].driver_index].push_back(i);
  for (int i = 0; i < static_cast<int>(grid.cells.size()); ++i) {
    const QcaCell& c = grid.cells[i];
    if (c.net_id < 0 || c.driver_index < 0) continue;
    if (c.role == CellRole::Fixed || c.role == CellRole::Input) continue;
    bool joined = grid.cells[c.driver_index].zone == c.zone;
    for (int k : kids[i])
      if (grid.cells[k].zone == c.zone) joined = true;
    if (!joined) bad.push_back("lone zone segment at " + spot(c));
  }

  // Every input of a device must arrive on the same total phase.
  for (const auto& c : grid.cells) {
    if (c.role != CellRole::Device) continue;
    const int dr[4] = {0, 0, 1, -1}, dc[4] = {1, -1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const QcaCell* nb = grid.at(c.row + dr[k], c.col + dc[k]);
      if (nb && nb->phase < c.phase && nb->phase != c.phase - 1)
        bad.push_back("device " + spot(c) + " input at " + spot(*nb) +
                      " arrives on phase " + std::to_string(nb->phase) +
                      " instead of " + std::to_string(c.phase - 1));
    }
  }

  // Unrelated nets must not trade signal through a side contact: only cells
  // two zones apart (mutually idle) may touch. Rotated-normal contacts are
  // null by symmetry, devices collect their own fan-in, and a driver pair
  // crossing a net boundary is an inverter hand-off, not interference.
  for (int i = 0; i < static_cast<int>(grid.cells.size()); ++i) {
    const QcaCell& c = grid.cells[i];
    const int dr[2] = {0, 1}, dc[2] = {1, 0};
    for (int k = 0; k < 2; ++k) {
      auto it = grid.index.find({c.row + dr[k], c.col + dc[k]});
      if (it == grid.index.end()) continue;
      const QcaCell& nb = grid.cells[it->second];
      if (c.net_id < 0 || nb.net_id < 0 || c.net_id == nb.net_id) continue;
      if (c.rotated != nb.rotated) continue;
      if (c.role == CellRole::Device || nb.role == CellRole::Device) continue;
      if (c.driver_index == it->second || nb.driver_index == i) continue;
      if (((c.zone - nb.zone) % 4 + 4) % 4 != 2)
        bad.push_back("nets " + std::to_string(c.net_id) + " and " +
                      std::to_string(nb.net_id) + " touch at " + spot(c));
    }
  }
  return bad;
}

std::string render_svg(const CellGrid& grid) {
  const char* fill[4] = {"#5fb85f", "#9467bd", "#4c8fd6", "#ffffff"};
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;
  if (!grid.cells.empty()) {
    r0 = r1 = grid.cells[0].row;
    c0 = c1 = grid.cells[0].col;
    for (const auto& c : grid.cells) {
      r0 = std::min(r0, c.row);
      r1 = std::max(r1, c.row);
      c0 = std::min(c0, c.col);
      c1 = std::max(c1, c.col);
    }
  }
  double pitch = grid.geom.pitch_nm, size = grid.geom.cell_size_nm;
  double margin = pitch;
  double w = (c1 - c0) * pitch + size + 2 * margin;
  double h = (r1 - r0) * pitch + size + 2 * margin;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " "
     << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"#f4f4f4\"/>\n";
  for (const auto& c : grid.cells) {
    double x = margin + (c.col - c0) * pitch;
    double y = margin + (c.row - r0) * pitch;
    double cx = x + size / 2, cy = y + size / 2;
    os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << size
       << "\" height=\"" << size << "\" fill=\"" << fill[c.zone & 3]
       << "\" stroke=\"#444\" stroke-width=\"1\"";
    if (c.rotated) os << " transform=\"rotate(45 " << cx << " " << cy << ")\"";
    if (c.role == CellRole::Fixed) os << " stroke-dasharray=\"3 2\"";
    os << "/>\n";
    double rr = grid.geom.dot_diameter_nm / 2;
    double off = size / 4;
    for (int sx : {-1, 1})
      for (int sy : {-1, 1})
        os << "<circle cx=\"" << cx + sx * off << "\" cy=\"" << cy + sy * off
           << "\" r=\"" << rr << "\" fill=\"#00000033\"/>\n";
    if (!c.label.empty())
      os << "<text x=\"" << cx << "\" y=\"" << y - 3
         << "\" font-size=\"9\" text-anchor=\"middle\">" << c.label << "</text>\n";
    if (c.role == CellRole::Fixed)
      os << "<text x=\"" << cx << "\" y=\"" << cy + 3
         << "\" font-size=\"9\" text-anchor=\"middle\">"
         << (c.fixed_polarization > 0 ? "+1" : "-1") << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace qcaforge
