#include "qcaforge/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace qcaforge {

namespace {

constexpr double kElectron = 1.602176634e-19;  // C
constexpr double kEps0 = 8.8541878128e-12;     // F/m
constexpr double kPi = 3.14159265358979323846;

struct Dot {
  double x, y;   // nm offsets from cell center
  double sign;   // charge = sign * e*P/2
};

// Dot layout: four dots, anticlockwise from the upper right (y grows down on
// the grid, so "upper" means -y). P = +1 puts the electrons on dots 1 and 3.
// Electron density on the P diagonal is (1+P)/2, giving net dot charges
// -eP/2 on dots 1,3 and +eP/2 on dots 2,4.
std::array<Dot, 4> cell_dots(const QcaCell& c, const Geometry& geom) {
  double d = geom.cell_size_nm / 4.0;
  if (!c.rotated) {
    return {Dot{+d, -d, -1.0}, Dot{-d, -d, +1.0}, Dot{-d, +d, -1.0},
            Dot{+d, +d, +1.0}};
  }
  double r = d * std::sqrt(2.0);
  return {Dot{0, -r, -1.0}, Dot{-r, 0, +1.0}, Dot{0, +r, -1.0}, Dot{+r, 0, +1.0}};
}

double coulomb_sum(const QcaCell& a, const QcaCell& b, const Geometry& geom,
                   double eps_r, double pa, double pb) {
  auto da = cell_dots(a, geom);
  auto db = cell_dots(b, geom);
  double ax = a.col * geom.pitch_nm, ay = a.row * geom.pitch_nm;
  double bx = b.col * geom.pitch_nm, by = b.row * geom.pitch_nm;
  const double k = 1.0 / (4.0 * kPi * kEps0 * eps_r);
  double u = 0.0;
  for (const auto& di : da) {
    double qi = di.sign * kElectron * pa / 2.0;
    for (const auto& dj : db) {
      double qj = dj.sign * kElectron * pb / 2.0;
      double dx = (bx + dj.x) - (ax + di.x);
      double dy = (by + dj.y) - (ay + di.y);
      double r = std::sqrt(dx * dx + dy * dy) * 1e-9;
      u += k * qi * qj / r;
    }
  }
  return u;
}

}  // namespace

double polarization_from_densities(const std::array<double, 4>& rho) {
  double sum = rho[0] + rho[1] + rho[2] + rho[3];
  for (double r : rho)
    if (r < 0.0) throw QcaError("sim", "negative dot density");
  if (sum <= 0.0) throw QcaError("sim", "all-zero dot densities");
  return ((rho[0] + rho[2]) - (rho[1] + rho[3])) / sum;
}

double kink_energy(const QcaCell& a, const QcaCell& b, const Geometry& geom,
                   double eps_r) {
  if (a.row == b.row && a.col == b.col)
    throw QcaError("sim", "kink energy of coincident cells");
  double aligned = coulomb_sum(a, b, geom, eps_r, 1.0, 1.0);
  double anti = coulomb_sum(a, b, geom, eps_r, 1.0, -1.0);
  return anti - aligned;
}

int zone_phase(int zone, int quarter) { return ((quarter - zone) % 4 + 4) % 4; }

double clock_gamma(int zone, int sample, const SimParams& params) {
  int qlen = params.samples_per_cycle / 4;
  int quarter = sample / qlen;
  double f = (sample % qlen + 0.5) / qlen;
  switch (zone_phase(zone, quarter)) {
    case 0: return params.gamma_max + (params.gamma_min - params.gamma_max) * f;
    case 1: return params.gamma_min;
    case 2: return params.gamma_min + (params.gamma_max - params.gamma_min) * f;
    default: return params.gamma_max;
  }
}

namespace {

struct Neighbor {
  int cell;
  double ek;
};

// Kink energies depend only on the relative offset and rotations; cache them.
struct EkCache {
  const Geometry& geom;
  double eps_r;
  std::map<std::tuple<int, int, bool, bool>, double> table;

  double get(const QcaCell& a, const QcaCell& b) {
    auto key = std::make_tuple(b.row - a.row, b.col - a.col, a.rotated, b.rotated);
    auto it = table.find(key);
    if (it != table.end()) return it->second;
    double e = kink_energy(a, b, geom, eps_r);
    table[key] = e;
    return e;
  }
};

}  // namespace

SimTrace simulate(const CellGrid& grid,
                  const std::vector<std::map<std::string, int>>& vectors,
                  const SimParams& params, const std::vector<int>& trace_cells) {
  const int n = grid.cell_count();
  if (n == 0) throw QcaError("sim", "empty grid");
  if (grid.output_cells.empty()) throw QcaError("sim", "grid has no output cells");

  // Deterministic row-major update order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const QcaCell& ca = grid.cells[a];
    const QcaCell& cb = grid.cells[b];
    return std::tie(ca.row, ca.col) < std::tie(cb.row, cb.col);
  });

  // Neighbour lists within the radius of effect.
  EkCache cache{grid.geom, params.eps_r, {}};
  std::vector<std::vector<Neighbor>> nbr(n);
  const double r2max = params.radius_nm * params.radius_nm;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double dx = (grid.cells[j].col - grid.cells[i].col) * grid.geom.pitch_nm;
      double dy = (grid.cells[j].row - grid.cells[i].row) * grid.geom.pitch_nm;
      if (dx * dx + dy * dy > r2max) continue;
      nbr[i].push_back({j, cache.get(grid.cells[i], grid.cells[j])});
    }
  }

  const int qlen = params.samples_per_cycle / 4;
  int max_delay = 0;
  for (int oc : grid.output_cells) max_delay = std::max(max_delay, grid.cells[oc].phase);
  const int total_quarters = max_delay + 6;
  const long total_samples = static_cast<long>(total_quarters) * qlen;

  SimTrace trace;
  for (int oc : grid.output_cells) trace.output_names.push_back(grid.cells[oc].label);
  trace.traced_cells = trace_cells;
  if (trace.traced_cells.empty()) {
    trace.traced_cells = grid.input_cells;
    trace.traced_cells.insert(trace.traced_cells.end(), grid.output_cells.begin(),
                              grid.output_cells.end());
  }

  std::vector<double> p(n), gamma_by_zone(4);
  std::vector<bool> frozen(n);

  for (const auto& vec : vectors) {
    // Fresh state per vector: forced inputs, anchored fixed cells, zero rest.
    for (int i = 0; i < n; ++i) {
      const QcaCell& c = grid.cells[i];
      frozen[i] = false;
      p[i] = 0.0;
      if (c.role == CellRole::Fixed) {
        p[i] = c.fixed_polarization;
        frozen[i] = true;
      } else if (c.role == CellRole::Input) {
        auto it = vec.find(c.label);
        if (it == vec.end())
          throw QcaError("sim", "vector missing value for input '" + c.label + "'");
        p[i] = (it->second ? 1.0 : -1.0) * params.input_strength;
        frozen[i] = true;
      }
    }

    trace.series.emplace_back();
    auto& vec_series = trace.series.back();

    VectorResult result;
    result.inputs = vec;
    result.bits.resize(grid.output_cells.size(), -1);
    result.polarization.resize(grid.output_cells.size(), 0.0);
    result.latch_sample.resize(grid.output_cells.size(), -1);

    for (long t = 0; t < total_samples; ++t) {
      for (int z = 0; z < 4; ++z)
        gamma_by_zone[z] = clock_gamma(z, static_cast<int>(t), params);

      bool converged = false;
      for (int it = 0; it < params.max_iterations && !converged; ++it) {
        double worst = 0.0;
        for (int oi : order) {
          if (frozen[oi]) continue;
          const QcaCell& c = grid.cells[oi];
          double x = 0.0;
          for (const auto& nb : nbr[oi]) x += nb.ek * p[nb.cell];
          x /= 2.0 * gamma_by_zone[c.zone];
          double np = x / std::sqrt(1.0 + x * x);
          worst = std::max(worst, std::fabs(np - p[oi]));
          p[oi] = np;
        }
        converged = worst < params.tolerance;
      }
      if (!converged)
        throw QcaError("sim", "relaxation did not converge at sample " +
                                  std::to_string(t), t);

      vec_series.emplace_back();
      auto& row = vec_series.back();
      row.reserve(trace.traced_cells.size());
      for (int tc : trace.traced_cells) row.push_back(static_cast<float>(p[tc]));
      for (int i = 0; i < n; ++i)
        trace.max_abs_polarization = std::max(trace.max_abs_polarization, std::fabs(p[i]));

      // Latch each output mid-Hold after its pipeline fill: quarter delay+5
      // always lands on the Hold phase of zone (delay mod 4).
      for (size_t k = 0; k < grid.output_cells.size(); ++k) {
        const QcaCell& oc = grid.cells[grid.output_cells[k]];
        long latch = static_cast<long>(oc.phase + 5) * qlen + qlen / 2;
        if (t == latch) {
          result.bits[k] = p[grid.output_cells[k]] > 0.0 ? 1 : 0;
          result.polarization[k] = p[grid.output_cells[k]];
          result.latch_sample[k] = t;
        }
      }
    }
    trace.latched.push_back(std::move(result));
  }
  return trace;
}

std::string SimTrace::to_csv(const CellGrid& grid) const {
  std::ostringstream out;
  out << "vector,sample";
  for (int tc : traced_cells) {
    const QcaCell& c = grid.cells[tc];
    std::string name = c.label.empty()
                           ? "r" + std::to_string(c.row) + "c" + std::to_string(c.col)
                           : c.label;
    out << "," << name;
  }
  out << "\n";
  for (size_t v = 0; v < series.size(); ++v)
    for (size_t t = 0; t < series[v].size(); ++t) {
      out << v << "," << t;
      for (float x : series[v][t]) out << "," << x;
      out << "\n";
    }
  return out.str();
}

}  // namespace qcaforge
