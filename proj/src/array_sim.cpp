#include "cimtherm/array_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cimtherm/error.hpp"

namespace cimtherm {

ArrayState::ArrayState(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) throw ValidationError("array dimensions must be positive");
  bits_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0);
}

double PowerMap::total_power() const { return std::accumulate(watts.begin(), watts.end(), 0.0); }

PowerMap PowerMap::from_energy(const EnergyAccumulator& acc, double window, double cell_area) {
  PowerMap p;
  p.rows = acc.rows;
  p.cols = acc.cols;
  p.window = window;
  p.cell_area = cell_area;
  p.watts.resize(acc.cell_energy.size());
  for (std::size_t i = 0; i < acc.cell_energy.size(); ++i) p.watts[i] = acc.cell_energy[i] / window;
  return p;
}

namespace {

void check_lanes(const LaneSet& lanes, int limit, const char* what) {
  if (lanes.empty()) throw ExecutionError(std::string(what) + ": empty lane set");
  if (lanes.max() >= limit)
    throw ExecutionError(std::string(what) + ": lane " + std::to_string(lanes.max()) + " out of range");
}

}  // namespace

void validate_instruction(const Instruction& instr, int rows, int cols) {
  std::visit(
      [&](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, GateOp>) {
          const int lane_limit = i.dir == Direction::Row ? rows : cols;
          const int operand_limit = i.dir == Direction::Row ? cols : rows;
          check_lanes(i.lanes, lane_limit, "gate");
          const int n = arity(i.gate);
          for (int k = 0; k < n; ++k) {
            if (i.inputs[k] < 0 || i.inputs[k] >= operand_limit)
              throw ExecutionError("gate: operand " + std::to_string(i.inputs[k]) + " out of range");
            if (i.inputs[k] == i.output) throw ExecutionError("gate: output overlaps an input");
            for (int m = 0; m < k; ++m)
              if (i.inputs[m] == i.inputs[k]) throw ExecutionError("gate: duplicate input operand");
          }
          if (i.output < 0 || i.output >= operand_limit)
            throw ExecutionError("gate: output " + std::to_string(i.output) + " out of range");
        } else if constexpr (std::is_same_v<T, SerialWrite>) {
          if (i.row < 0 || i.row >= rows || i.col < 0 || i.col >= cols)
            throw ExecutionError("write: cell out of range");
        } else if constexpr (std::is_same_v<T, BulkSet>) {
          const int lane_limit = i.dir == Direction::Row ? rows : cols;
          const int line_limit = i.dir == Direction::Row ? cols : rows;
          check_lanes(i.lanes, lane_limit, "bulk-set");
          if (i.line < 0 || i.line >= line_limit) throw ExecutionError("bulk-set: line out of range");
        }
      },
      instr);
}

void validate_program(const Program& program, int rows, int cols) {
  for (std::size_t k = 0; k < program.size(); ++k) {
    try {
      validate_instruction(program[k], rows, cols);
    } catch (const ExecutionError& e) {
      throw ExecutionError("instruction " + std::to_string(k) + " (" + format_instruction(program[k]) +
                           "): " + e.what());
    }
  }
}

void execute_logic(ArrayState& array, const Instruction& instr) {
  std::visit(
      [&](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, GateOp>) {
          const int n = arity(i.gate);
          const bool row_dir = i.dir == Direction::Row;
          i.lanes.for_each([&](int lane) {
            unsigned mask = 0;
            for (int k = 0; k < n; ++k)
              if (row_dir ? array.get(lane, i.inputs[k]) : array.get(i.inputs[k], lane)) mask |= 1u << k;
            const bool v = truth(i.gate, InputPattern(mask, n));
            if (row_dir)
              array.set(lane, i.output, v);
            else
              array.set(i.output, lane, v);
          });
        } else if constexpr (std::is_same_v<T, SerialWrite>) {
          array.set(i.row, i.col, i.value);
        } else if constexpr (std::is_same_v<T, BulkSet>) {
          i.lanes.for_each([&](int lane) {
            if (i.dir == Direction::Row)
              array.set(lane, i.line, i.value);
            else
              array.set(i.line, lane, i.value);
          });
        }
      },
      instr);
}

void step(ArrayState& array, const Instruction& instr, const GateTable& table, EnergyAccumulator& acc) {
  std::visit(
      [&](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, GateOp>) {
          const int n = arity(i.gate);
          const bool row_dir = i.dir == Direction::Row;
          const auto cell = [&](int lane, int operand) {
            return row_dir ? array.index(lane, operand) : array.index(operand, lane);
          };
          const auto gi = static_cast<std::size_t>(i.gate);
          acc.gate_instructions[gi] += 1;
          for (const auto& r : i.lanes.ranges()) {
            for (int lane = r.first; lane <= r.last; ++lane) {
              const int rr = row_dir ? lane : i.output;
              const int cc = row_dir ? i.output : lane;
              unsigned mask = 0;
              for (int k = 0; k < n; ++k) {
                const int ir = row_dir ? lane : i.inputs[k];
                const int ic = row_dir ? i.inputs[k] : lane;
                if (array.get(ir, ic)) mask |= 1u << k;
              }
              const auto& e = table.lookup(i.gate, mask, array.get(rr, cc));
              array.set(rr, cc, e.new_output);
              acc.cell_energy[cell(lane, i.output)] += e.preset_energy + e.output_energy;
              for (int k = 0; k < n; ++k) acc.cell_energy[cell(lane, i.inputs[k])] += e.input_energy[k];
              acc.total_energy += e.total_energy;
            }
            acc.gate_lane_ops[gi] += r.last - r.first + 1;
          }
        } else if constexpr (std::is_same_v<T, SerialWrite>) {
          const auto gate = i.value ? GateKind::WRITE1 : GateKind::WRITE0;
          const auto& e = table.lookup(gate, 0, array.get(i.row, i.col));
          array.set(i.row, i.col, i.value);
          acc.cell_energy[array.index(i.row, i.col)] += e.output_energy;
          acc.total_energy += e.total_energy;
          acc.serial_writes += 1;
        } else if constexpr (std::is_same_v<T, BulkSet>) {
          const auto gate = i.value ? GateKind::WRITE1 : GateKind::WRITE0;
          const bool row_dir = i.dir == Direction::Row;
          i.lanes.for_each([&](int lane) {
            const int rr = row_dir ? lane : i.line;
            const int cc = row_dir ? i.line : lane;
            const auto& e = table.lookup(gate, 0, array.get(rr, cc));
            array.set(rr, cc, i.value);
            acc.cell_energy[array.index(rr, cc)] += e.output_energy;
            acc.total_energy += e.total_energy;
          });
          acc.bulk_sets += 1;
          acc.bulk_cells += i.lanes.size();
        } else {
          acc.idle_instructions += 1;
        }
      },
      instr);
}

std::int64_t active_cycles_for(double sim_time, double t_clk) {
  const double ratio = sim_time / t_clk;
  // Guard against 1e-3 / 3e-9 style representation error just below an integer.
  return static_cast<std::int64_t>(std::floor(ratio * (1.0 + 1e-12)));
}

std::int64_t idle_cycles_for(std::int64_t active, double duty) {
  if (duty >= 1.0) return 0;
  return std::llround(static_cast<double>(active) * (1.0 - duty) / duty);
}

namespace {

ExecutionStats stats_from(const EnergyAccumulator& acc) {
  ExecutionStats s;
  s.gate_instructions = acc.gate_instructions;
  s.gate_lane_ops = acc.gate_lane_ops;
  s.serial_writes = acc.serial_writes;
  s.bulk_sets = acc.bulk_sets;
  s.idle_instructions = acc.idle_instructions;
  s.total_energy = acc.total_energy;
  return s;
}

}  // namespace

RunResult run(const Program& program, ArrayState initial, const GateTable& table, const RunWindow& window) {
  if (program.empty()) throw ExecutionError("run: empty program");
  if (!(window.duty_cycle > 0.0 && window.duty_cycle <= 1.0))
    throw ValidationError("run: duty_cycle must lie in (0, 1]");
  validate_program(program, initial.rows(), initial.cols());

  const double t_clk = table.tech().t_clk;
  const std::int64_t active = active_cycles_for(window.sim_time, t_clk);
  if (active < 1) throw ValidationError("run: sim_time shorter than one clock cycle");
  const std::int64_t idle = idle_cycles_for(active, window.duty_cycle);
  const std::int64_t total = active + idle;

  EnergyAccumulator acc(initial.rows(), initial.cols());
  ArrayState state = std::move(initial);
  std::size_t pc = 0;
  if (idle == 0) {
    for (std::int64_t t = 0; t < active; ++t) {
      step(state, program[pc], table, acc);
      if (++pc == program.size()) pc = 0;
    }
  } else {
    // Active at t iff floor((t+1)A/T) > floor(tA/T): evenly spaced, deterministic.
    using u128 = unsigned __int128;
    const auto A = static_cast<u128>(active);
    const auto T = static_cast<u128>(total);
    for (std::int64_t t = 0; t < total; ++t) {
      const auto tt = static_cast<u128>(t);
      if ((tt + 1) * A / T > tt * A / T) {
        step(state, program[pc], table, acc);
        if (++pc == program.size()) pc = 0;
      }
    }
  }

  RunResult r;
  r.stats = stats_from(acc);
  r.stats.cycles = total;
  r.stats.active_instructions = active;
  r.stats.idle_cycles_injected = idle;
  r.stats.simulated_time = static_cast<double>(total) * t_clk;
  r.power = PowerMap::from_energy(acc, r.stats.simulated_time, table.tech().cell_area());
  r.final_state = std::move(state);
  return r;
}

RunResult run(const Program& program, ArrayState initial, const SimulationConfig& config) {
  const GateTable table(config.technology);
  return run(program, std::move(initial), table, RunWindow{config.sim_time, config.duty_cycle});
}

std::vector<std::int64_t> phase_lengths(std::span<const ArrayPlan> plans) {
  if (plans.empty()) throw ValidationError("multi-array run: at least one plan required");
  const auto phases = plans.front().phases.size();
  if (phases == 0) throw ValidationError("multi-array run: plans need at least one phase");
  std::vector<std::int64_t> len(phases, 0);
  for (const auto& p : plans) {
    if (p.phases.size() != phases)
      throw ValidationError("multi-array run: inconsistent phase definitions (array '" + p.name + "' has " +
                            std::to_string(p.phases.size()) + " phases, expected " +
                            std::to_string(phases) + ")");
    for (std::size_t k = 0; k < phases; ++k)
      len[k] = std::max(len[k], static_cast<std::int64_t>(p.phases[k].size()));
  }
  return len;
}

MultiArrayResult multi_array_run(std::span<const ArrayPlan> plans, const GateTable& table, double sim_time) {
  MultiArrayResult out;
  out.phase_lengths = phase_lengths(plans);
  out.schedule_length = std::accumulate(out.phase_lengths.begin(), out.phase_lengths.end(), std::int64_t{0});
  if (out.schedule_length == 0) throw ExecutionError("multi-array run: every phase is empty");

  const double t_clk = table.tech().t_clk;
  const std::int64_t cycles = active_cycles_for(sim_time, t_clk);
  if (cycles < 1) throw ValidationError("multi-array run: sim_time shorter than one clock cycle");

  for (const auto& plan : plans) {
    for (const auto& prog : plan.phases) validate_program(prog, plan.initial.rows(), plan.initial.cols());
    EnergyAccumulator acc(plan.initial.rows(), plan.initial.cols());
    ArrayState state = plan.initial;
    std::int64_t executed = 0;
    std::size_t phase = 0;
    while (out.phase_lengths[phase] == 0) ++phase;
    std::int64_t offset = 0;
    for (std::int64_t t = 0; t < cycles; ++t) {
      const auto& prog = plan.phases[phase];
      if (offset < static_cast<std::int64_t>(prog.size())) {
        step(state, prog[static_cast<std::size_t>(offset)], table, acc);
        ++executed;
      }
      if (++offset == out.phase_lengths[phase]) {
        offset = 0;
        do {
          phase = (phase + 1) % plan.phases.size();
        } while (out.phase_lengths[phase] == 0);
      }
    }
    RunResult r;
    r.stats = stats_from(acc);
    r.stats.cycles = cycles;
    r.stats.active_instructions = executed;
    r.stats.barrier_idle_cycles = cycles - executed;
    r.stats.simulated_time = static_cast<double>(cycles) * t_clk;
    r.power = PowerMap::from_energy(acc, r.stats.simulated_time, table.tech().cell_area());
    r.final_state = std::move(state);
    out.arrays.push_back(std::move(r));
  }
  return out;
}

}  // namespace cimtherm
