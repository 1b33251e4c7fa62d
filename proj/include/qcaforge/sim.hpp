#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "qcaforge/layout.hpp"

namespace qcaforge {

struct SimParams {
  double gamma_min = 3.8e-23;   // J, tunneling energy during Hold
  double gamma_max = 9.8e-22;   // J, tunneling energy during Relax
  double eps_r = 12.9;          // relative permittivity
  double radius_nm = 80.0;      // radius of effect
  double tolerance = 1e-3;      // relaxation convergence threshold
  int max_iterations = 100;     // sweeps per sample before giving up
  int samples_per_cycle = 128;  // one full 4-phase clock cycle
  double input_strength = 1.0;  // |P| applied to forced input cells
};

// P = ((rho1 + rho3) - (rho2 + rho4)) / sum, dots indexed anticlockwise from
// the upper right. Throws on all-zero densities.
double polarization_from_densities(const std::array<double, 4>& rho);

// Electrostatic kink energy (J): energy of anti-aligned minus aligned
// polarizations, via the 16-term Coulomb sum over both cells' dot charges.
// Positive for side-by-side neighbours (alignment preferred), negative for
// diagonal neighbours (anti-alignment preferred). Throws on coincident cells.
double kink_energy(const QcaCell& a, const QcaCell& b, const Geometry& geom,
                   double eps_r);

// Phase of `zone` during global quarter-period `quarter`:
// 0 Switch, 1 Hold, 2 Release, 3 Relax. Zone k leads zone k+1 by one quarter.
int zone_phase(int zone, int quarter);

// Trapezoidal tunneling-energy waveform for a zone at a global sample index.
double clock_gamma(int zone, int sample, const SimParams& params);

struct VectorResult {
  std::map<std::string, int> inputs;
  std::vector<int> bits;             // latched output bits, grid output order
  std::vector<double> polarization;  // raw latched polarizations
  std::vector<long> latch_sample;    // sample index each output was read at
};

struct SimTrace {
  std::vector<std::string> output_names;
  std::vector<int> traced_cells;  // grid cell indices recorded in series
  // series[vector][sample][traced-cell] = polarization
  std::vector<std::vector<std::vector<float>>> series;
  std::vector<VectorResult> latched;
  double max_abs_polarization = 0.0;

  std::string to_csv(const CellGrid& grid) const;
};

// Bistable relaxation over the grid for each input vector independently
// (fresh state per vector). Input cells are forced to +-input_strength by
// label, fixed cells held at their polarization. Each output is latched
// during the Hold phase of its zone after the pipeline has filled (its delay
// in quarters plus one warm-up cycle). Throws QcaError("sim", ...) with the
// sample index when a sample fails to converge.
SimTrace simulate(const CellGrid& grid,
                  const std::vector<std::map<std::string, int>>& vectors,
                  const SimParams& params,
                  const std::vector<int>& trace_cells = {});

}  // namespace qcaforge
