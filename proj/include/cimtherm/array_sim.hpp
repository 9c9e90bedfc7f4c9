#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cimtherm/config.hpp"
#include "cimtherm/electrical.hpp"
#include "cimtherm/instruction.hpp"

namespace cimtherm {

/// Dense bit grid of one CiM array.
class ArrayState {
 public:
  ArrayState() = default;
  ArrayState(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  bool get(int row, int col) const { return bits_[index(row, col)] != 0; }
  void set(int row, int col, bool v) { bits_[index(row, col)] = v ? 1 : 0; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col);
  }

  bool operator==(const ArrayState&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Per-cell deposited energy and instruction counters.
struct EnergyAccumulator {
  int rows = 0;
  int cols = 0;
  std::vector<double> cell_energy;  // J, row-major
  std::array<std::int64_t, kAllGates.size()> gate_instructions{};
  std::array<std::int64_t, kAllGates.size()> gate_lane_ops{};
  std::int64_t serial_writes = 0;
  std::int64_t bulk_sets = 0;
  std::int64_t bulk_cells = 0;
  std::int64_t idle_instructions = 0;
  double total_energy = 0.0;  // J, sum of per-operation cycle energies

  EnergyAccumulator() = default;
  EnergyAccumulator(int r, int c) : rows(r), cols(c), cell_energy(static_cast<std::size_t>(r) * c, 0.0) {}
};

struct ExecutionStats {
  std::int64_t cycles = 0;               // includes injected and barrier idles
  std::int64_t active_instructions = 0;  // program instructions retired
  std::int64_t idle_cycles_injected = 0; // duty-cycle throttling
  std::int64_t barrier_idle_cycles = 0;  // multi-array phase waits
  std::array<std::int64_t, kAllGates.size()> gate_instructions{};
  std::array<std::int64_t, kAllGates.size()> gate_lane_ops{};
  std::int64_t serial_writes = 0;
  std::int64_t bulk_sets = 0;
  std::int64_t idle_instructions = 0;
  double total_energy = 0.0;
  double simulated_time = 0.0;  // cycles * t_clk

  double realized_duty() const {
    return cycles ? static_cast<double>(cycles - idle_cycles_injected - barrier_idle_cycles) /
                        static_cast<double>(cycles)
                  : 0.0;
  }
};

/// Time-averaged power per cell over a simulated window.
struct PowerMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> watts;  // row-major
  double window = 0.0;        // s
  double cell_area = 0.0;     // m^2

  double at(int r, int c) const { return watts[static_cast<std::size_t>(r) * cols + c]; }
  double total_power() const;
  double array_area() const { return static_cast<double>(rows) * cols * cell_area; }
  /// W/cm^2.
  double power_density() const { return total_power() / (array_area() * 1e4); }

  static PowerMap from_energy(const EnergyAccumulator& acc, double window, double cell_area);
};

/// Throws ExecutionError for malformed instructions (operand out of range,
/// duplicate operands, output aliasing an input, lane out of range).
void validate_instruction(const Instruction& instr, int rows, int cols);
void validate_program(const Program& program, int rows, int cols);

/// Boolean effect of one instruction, no electrical accounting.
void execute_logic(ArrayState& array, const Instruction& instr);

/// Executes one instruction for all active lanes.
void step(ArrayState& array, const Instruction& instr, const GateTable& table, EnergyAccumulator& acc);

struct RunResult {
  PowerMap power;
  ExecutionStats stats;
  ArrayState final_state;
};

/// Timing of a simulated run. The active instruction count is
/// floor(sim_time / t_clk); with duty < 1 idle cycles are spread evenly
/// among them, stretching the window to active / duty cycles.
struct RunWindow {
  double sim_time = 1e-3;
  double duty_cycle = 1.0;
};

std::int64_t active_cycles_for(double sim_time, double t_clk);
/// Idle cycles to inject for `active` instructions at duty `d`.
std::int64_t idle_cycles_for(std::int64_t active, double duty);

/// Repeats the program cyclically.
RunResult run(const Program& program, ArrayState initial, const GateTable& table, const RunWindow& window);
RunResult run(const Program& program, ArrayState initial, const SimulationConfig& config);

/// One array of a multi-array plan: per-phase programs (possibly empty).
struct ArrayPlan {
  std::string name;
  ArrayState initial;
  std::vector<Program> phases;
};

struct MultiArrayResult {
  std::vector<RunResult> arrays;
  std::vector<std::int64_t> phase_lengths;  // barrier-to-barrier cycles
  std::int64_t schedule_length = 0;         // cycles of one pass over all phases
};

/// Arrays advance phase by phase; every phase lasts as long as its slowest
/// array and faster arrays idle (zero power) until the barrier. The phase
/// schedule repeats for floor(sim_time / t_clk) cycles.
MultiArrayResult multi_array_run(std::span<const ArrayPlan> plans, const GateTable& table, double sim_time);

/// Length of each phase (max over arrays); throws ValidationError when the
/// plans disagree on the phase count.
std::vector<std::int64_t> phase_lengths(std::span<const ArrayPlan> plans);

}  // namespace cimtherm
