#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cimtherm/array_sim.hpp"
#include "cimtherm/config.hpp"
#include "cimtherm/kernels.hpp"
#include "cimtherm/thermal.hpp"
#include "json.hpp"

namespace cimtherm {

inline constexpr std::string_view kModelVersion = "cimtherm-1.0";

/// How realized utilization is counted for a kernel.
std::string_view utilization_basis(KernelKind kind);

/// Stable 64-bit FNV-1a digest, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

/// One array of a run with its own thermal solve.
struct ArrayReport {
  std::string name;
  int rows = 0;
  int cols = 0;
  int lanes = 0;
  ExecutionStats stats;
  FieldMetrics thermal;
};

struct RunReport {
  SimulationConfig config;
  int lanes = 0;
  double realized_utilization = 0.0;
  ExecutionStats stats;  // summed over arrays
  double total_power = 0.0;     // W
  double power_density = 0.0;   // W/cm^2, hottest array for multi-array runs
  double t_max = 0.0;           // deg C
  double t_min = 0.0;
  double rise_max = 0.0;        // K
  double rise_max_full_duty = 0.0;
  double max_duty_cycle = 1.0;  // keeps t_max at 125 deg C
  double relative_residual = 0.0;
  int solver_iterations = 0;
  double energy_balance = 0.0;
  std::optional<bool> oracle_match;
  std::vector<std::int64_t> phase_instructions;  // per phase kind
  std::vector<std::int64_t> phase_cycles;        // multi-array: barrier-to-barrier lengths, one schedule
  std::vector<ArrayReport> arrays;               // multi-array breakdown
};

nlohmann::json to_json(const RunReport& report, bool with_timestamp = true);

/// Report plus the fields behind the artifacts.
struct SimulationOutput {
  RunReport report;
  std::vector<PowerMap> power;            // one per array
  std::vector<TemperatureField> fields;   // one per array
  std::string kernel_data;                // JSON text
};

/// Kernel -> execution -> thermal solve for one array.
/// Errors keep their type; the message names the failing stage.
SimulationOutput simulate(const SimulationConfig& config);

/// Hopfield split over `column_arrays` column arrays plus one update array,
/// each of config.array_rows x config.array_cols. Neuron count comes from
/// config.kernel.neurons, otherwise 500 capped by the column count.
SimulationOutput simulate_multi_nn(const SimulationConfig& config, int column_arrays);

/// report.json, kernel_data.json, power.csv and per-layer temperature
/// tables (csv, txt, pgm). Multi-array runs suffix files with the array name.
void write_artifacts(const SimulationOutput& output, const std::filesystem::path& dir);

// ---------------------------------------------------------------- sweeps

enum class SweepAxis { Utilization, DutyCycle, ArraySize, Technology };

std::string_view to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view text);

struct SweepSpec {
  SweepAxis axis = SweepAxis::Utilization;
  std::vector<std::string> values;
  SimulationConfig base;

  /// Throws ValidationError for an empty list or a value outside the axis domain.
  void validate() const;
  SimulationConfig point(std::size_t index) const;
};

struct SweepPoint {
  std::string value;
  std::optional<RunReport> report;
  std::string error;  // set when the point failed
};

/// Runs every point on a pool of at most `workers` threads; results keep
/// the order of spec.values. A failing point is recorded and the sweep goes on.
std::vector<SweepPoint> run_sweep(const SweepSpec& spec, int workers = 0);

/// One row per point with unit-annotated headers.
void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepPoint>& points);

// ---------------------------------------------------------------- throttling

struct ThrottleRow {
  double duty = 0.0;
  double realized_duty = 0.0;
  double power_density = 0.0;
  double rise_max = 0.0;
  double t_max = 0.0;
};

struct ThrottleResult {
  double rise_max_full_duty = 0.0;
  double max_duty_cycle = 1.0;
  double t_max_at_max_duty = 0.0;
  std::vector<ThrottleRow> rows;  // requested duties, then the computed maximum
};

ThrottleResult run_throttle(const SimulationConfig& config, const std::vector<double>& duties);
void write_throttle_csv(std::ostream& out, const ThrottleResult& result);

// ---------------------------------------------------------------- tables

/// gate, v_gate [V], v_write [V] for every gate.
void write_voltage_table(std::ostream& out, const TechnologyParams& tech);
/// One row per gate, input pattern and prior output.
void write_current_table(std::ostream& out, const TechnologyParams& tech);

}  // namespace cimtherm
