#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcaforge/expr.hpp"

namespace qcaforge {

struct CrossbarPlan;  // planner.hpp

struct Geometry {
  double cell_size_nm = 18.0;
  double pitch_nm = 20.0;
  double dot_diameter_nm = 5.0;
  int spacing = 6;  // wire cells between neighbouring cross-point columns (5..7)
};

enum class CellRole { Normal, Input, Output, Fixed, Device };

struct QcaCell {
  int row = 0;
  int col = 0;
  CellRole role = CellRole::Normal;
  double fixed_polarization = 0.0;  // role == Fixed
  int zone = 0;                     // clock zone 0..3
  bool rotated = false;             // 45-degree cell (coplanar crossings)
  std::string label;                // input/output name, program markers

  // Routing provenance, used by delay accounting and the structural checks.
  int net_id = -1;        // routed signal path this cell belongs to (-1: indifferent)
  int driver_index = -1;  // index of the upstream cell in CellGrid::cells
  int phase = 0;          // cumulative clock phase from the input side; zone = phase % 4
};

struct CellGrid {
  Geometry geom;
  std::vector<QcaCell> cells;
  std::vector<int> input_cells;   // indices into cells; labels carry input names
  std::vector<int> output_cells;  // indices into cells; labels carry output names
  std::map<std::pair<int, int>, int> index;  // (row, col) -> cell index

  int add(QcaCell c) {
    auto key = std::make_pair(c.row, c.col);
    if (index.count(key))
      throw QcaError("layout", "two cells share position (" + std::to_string(c.row) +
                                   "," + std::to_string(c.col) + ")");
    int id = static_cast<int>(cells.size());
    index[key] = id;
    cells.push_back(std::move(c));
    if (cells.back().role == CellRole::Input) input_cells.push_back(id);
    if (cells.back().role == CellRole::Output) output_cells.push_back(id);
    return id;
  }

  const QcaCell* at(int row, int col) const {
    auto it = index.find({row, col});
    return it == index.end() ? nullptr : &cells[it->second];
  }

  int cell_count() const { return static_cast<int>(cells.size()); }

  // Bounding-box area of occupied cells in square micrometres.
  double area_um2() const;
};

// Lower a legal plan to a concrete grid of cells with clock zones assigned.
// Throws QcaError("layout", ...) when the plan cannot be realized (arm or
// wire collisions), which the planner uses to reject a candidate.
CellGrid lower(const CrossbarPlan& plan, const Geometry& geom);

// Recomputes clock zones on a lowered grid from the recorded phases; kept as
// a separate pass so re-programming a plan never changes the timing.
CellGrid assign_clocks(CellGrid grid, const CrossbarPlan& plan);

// Per output name: total count of zone transitions input-to-output (not mod 4),
// walked independently over the driver chain recorded in the cells.
std::map<std::string, int> delay_in_phases(const CellGrid& grid);

// Structural invariants: zone adjacency +1 mod 4 along driver chains, maximal
// same-zone run <= 7 cells, unintended-neighbour clearance. Returns a list of
// violations (empty when clean).
std::vector<std::string> check_grid(const CellGrid& grid);

// SVG rendering, cells coloured by zone (0 green, 1 purple, 2 blue, 3 white).
std::string render_svg(const CellGrid& grid);

}  // namespace qcaforge
