#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cimtherm/array_sim.hpp"
#include "cimtherm/tech_params.hpp"

namespace cimtherm {

/// Two-layer node grid over the array footprint: an active layer at the
/// cells and a bulk layer at the top of the die. Node (ix, iy) covers a
/// c x c block of cells; x runs along columns, y along rows.
struct ThermalGrid {
  int rows = 0;
  int cols = 0;
  int coalesce = 1;
  int nx = 0;
  int ny = 0;
  double dx = 0.0;         // node pitch along columns (m)
  double dy = 0.0;         // node pitch along rows (m)
  double dz_active = 0.0;  // active-layer conduction thickness (m)
  ThermalStack stack;

  int nodes_per_layer() const { return nx * ny; }
  int nodes() const { return 2 * nx * ny; }
  int active(int ix, int iy) const { return iy * nx + ix; }
  int bulk(int ix, int iy) const { return nx * ny + iy * nx + ix; }
  double node_area() const { return dx * dy; }
};

ThermalGrid build_grid(int rows, int cols, const TechnologyParams& tech, const ThermalStack& stack,
                       int coalesce_factor);

/// Branch resistances of one node (K/W).
struct NodeResistances {
  double lateral_active_x;
  double lateral_active_y;
  double active_bulk;
  double lateral_bulk_x;
  double lateral_bulk_y;
  double bulk_ambient;
};

NodeResistances node_resistances(const ThermalGrid& grid);

/// Compressed sparse rows.
struct CsrMatrix {
  int n = 0;
  std::vector<std::int64_t> row_ptr;
  std::vector<int> col;
  std::vector<double> val;

  void multiply(std::span<const double> x, std::span<double> y) const;
  double at(int r, int c) const;
  std::int64_t nonzeros() const { return static_cast<std::int64_t>(val.size()); }
};

struct ConductanceSystem {
  ThermalGrid grid;
  CsrMatrix g;                              // W/K
  std::vector<double> ambient_conductance;  // per node, zero on the active layer
};

ConductanceSystem assemble_conductance(const ThermalGrid& grid);

/// Sums cell powers into the active-layer nodes (length nx*ny).
std::vector<double> node_power(const ThermalGrid& grid, const PowerMap& power);

struct SolveOptions {
  double tolerance = 1e-10;  // on ||G T - P|| / ||P||
  int max_iterations = 200000;
};

struct TemperatureField {
  ThermalGrid grid;
  std::vector<double> rise;  // K above ambient; active layer then bulk layer
  double offset = 0.0;       // uniform level the solve was taken relative to (K)
  double relative_residual = 0.0;  // ||G T - P|| / ||P|| with T = offset + deviation
  int iterations = 0;

  double active_rise(int ix, int iy) const { return rise[grid.active(ix, iy)]; }
  double bulk_rise(int ix, int iy) const { return rise[grid.bulk(ix, iy)]; }
};

/// Conjugate gradients with an aggregation multigrid preconditioner. `active_power` has one entry
/// per active node (W). Throws ValidationError on a size mismatch or
/// negative power and SolverError when the iteration cap is reached.
TemperatureField solve_steady_state(const ConductanceSystem& system, std::span<const double> active_power,
                                    const SolveOptions& options = {});
TemperatureField solve_steady_state(const ConductanceSystem& system, const PowerMap& power,
                                    const SolveOptions& options = {});

struct FieldMetrics {
  double t_max = 0.0;  // deg C, active layer
  double t_min = 0.0;
  double rise_max = 0.0;  // K
  double rise_min = 0.0;
  double spread = 0.0;
  double total_power = 0.0;    // W
  double power_density = 0.0;  // W/cm^2 over the array footprint
  double heat_out = 0.0;       // W leaving through the ambient paths
  double energy_balance = 0.0; // (heat_out - total_power) / total_power
  double relative_residual = 0.0;
  int iterations = 0;
};

FieldMetrics field_metrics(const ConductanceSystem& system, const TemperatureField& field,
                           std::span<const double> active_power);

/// min(1, (limit - ambient) / rise_max at full duty).
double max_duty_cycle(double rise_max_at_full_duty, double ambient_c, double limit_c = 125.0);

/// Layer as a ny x nx CSV matrix of absolute temperatures (deg C), with a
/// header row of node columns and a leading node-row column.
void write_layer_csv(std::ostream& out, const TemperatureField& field, bool bulk_layer);
/// Whitespace-separated matrix, one grid row per line.
void write_layer_text(std::ostream& out, const TemperatureField& field, bool bulk_layer);
/// 8-bit binary PGM scaled between the layer's min and max.
void write_layer_pgm(std::ostream& out, const TemperatureField& field, bool bulk_layer);

}  // namespace cimtherm
