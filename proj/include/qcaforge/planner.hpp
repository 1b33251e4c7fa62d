#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qcaforge/netlist.hpp"

namespace qcaforge {

// How a cross-point behaves. Pass cross-points are wire continuations (a
// vertical feed crossing the line; over a live line this becomes a coplanar
// crossover in the layout).
enum class CrossPointKind { Pass, Majority, Inverter };

enum class ProgramSource { None, Top, Bottom, InputSide };

// Direction a standalone NOT's inverted output leaves its line.
enum class NotOutput { Down, Up };

// How a NOT gate is realized geometrically.
enum class NotMode {
  Jog,        // folded into the consumer's arm: the diagonal hop inverts
  LandDead,   // cross-point pattern, output lands on a reused dead line
  LandFresh,  // cross-point pattern, output lands on a line of its own
};

// One input of a planned gate.
enum class FeedStyle {
  Through,      // the signal rides the gate's own line into the device
  SideArm,      // vertical arm from another line (tap/turn/plus junction)
  InvertedArm,  // vertical arm seeded by a diagonal hop: inverts en route
  ConstFeed,    // fixed cell plus wire along the gate's own dead line segment
  ConstArm,     // fixed cell in the inter-line gap above/below the device
  ProgramArm,   // arm running to the top/bottom program line's fixed cell
};

struct Feed {
  FeedStyle style = FeedStyle::Through;
  int signal = -1;       // netlist signal id (signal-carrying styles)
  int source_line = -1;  // line the arm taps (SideArm/InvertedArm)
  bool from_above = false;  // arm reaches the device from the line above
  int const_value = -1;  // ConstFeed/ConstArm/ProgramArm: 0 or 1
};

struct PlannedGate {
  int gate_id = -1;  // id in the plan's netlist
  GateKind kind = GateKind::And;
  int line = -1;    // line whose row carries the device (NOT: its input line)
  int column = -1;  // logical column; stage s gates sit at column >= s
  std::vector<Feed> feeds;  // And/Or: 2 signals + 1 program; Maj3: 3; Not: 1
  ProgramSource program_source = ProgramSource::None;
  int program_value = -1;  // 0 = AND, 1 = OR, -1 = unprogrammed (Maj3/Not)
  NotMode not_mode = NotMode::Jog;
  NotOutput not_output = NotOutput::Down;
  int output_line = -1;    // line carrying the gate's output rightward
  int output_signal = -1;  // netlist signal id of the output
};

// A contiguous occupation of one line by one signal.
struct LineSpan {
  int signal = -1;
  int from_column = 0;  // first column whose band contains the signal's cells
  int to_column = 0;    // inclusive; outputs extend to n_columns (boundary)
};

struct PlanLine {
  int index = 0;
  std::vector<LineSpan> timeline;
  int input_occurrence = -1;  // signal id bound on the input side, -1 if none
  int input_const = -1;       // relaxed-rule constant bound on the input side
  std::string output_name;    // output bound on the output side, "" if none
};

struct CrossbarPlan {
  int n_lines = 0;
  int n_columns = 0;
  std::vector<PlanLine> lines;
  std::vector<PlannedGate> gates;
  // (line, column) -> index into gates. Jog NOTs have no cross-point of their
  // own: they live inside their consumer's arm.
  std::map<std::pair<int, int>, int> crosspoints;
  GateNetlist netlist;  // realized netlist (after splits/duplication)
  bool relaxed_constants = false;  // some gate draws its constant input-side
  bool from_search = true;         // exact search vs constructive fallback
  std::vector<std::string> notes;

  // Realized quantities the dimension inequalities are checked against.
  int realized_occurrences() const;
  int realized_not_gates() const;
  int realized_gates() const;  // And/Or/Maj3 count
  int realized_stages() const;
};

struct DimensionBounds {
  std::array<int, 2> lines{0, 0};
  std::array<int, 2> columns{0, 0};
};

// Closed intervals from the crossbar dimension inequalities:
// lines in [occurrences, occurrences + NOT gates], columns in [stages, gates].
DimensionBounds compute_dimension_bounds(const GateNetlist& net);

struct PlannerOptions {
  bool reuse_lines = true;
  // Forbid relaxed input-side constants; programming then only happens from
  // the top/bottom program lines and mid-grid AND/OR gates become infeasible.
  bool strict_program_lines = false;
  NotOutput not_output = NotOutput::Down;  // preferred standalone direction
};

// Place gates at cross-points. Small netlists go through an exact search over
// occurrence splits, line orders and gate line assignments minimizing extra
// occurrence splits first, then (N_lines, N_columns); larger ones through a
// constructive block layout that duplicates shared logic into a forest.
CrossbarPlan place(const GateNetlist& netlist, const PlannerOptions& options = {});
CrossbarPlan place(const Circuit& circuit, const PlannerOptions& options = {});

// Reprogram the majority gate at a cross-point as AND or OR. Geometry is
// untouched; only the program value changes.
CrossbarPlan program(CrossbarPlan plan, std::pair<int, int> crosspoint,
                     GateKind kind);

// Legality predicate: empty vector when the plan is sound, else one message
// per violation (dimension inequalities, cross-point uniqueness, extreme-line
// programs, monotone signal flow, corridor clearance).
std::vector<std::string> check_plan(const CrossbarPlan& plan);

std::string plan_to_text(const CrossbarPlan& plan);
std::string plan_to_json(const CrossbarPlan& plan);

}  // namespace qcaforge
