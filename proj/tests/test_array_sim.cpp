#include <cmath>
#include <numeric>

#include "cimtherm/array_sim.hpp"
#include "cimtherm/error.hpp"
#include "doctest.h"

using namespace cimtherm;

namespace {

const auto kStt = builtin_technology(TechKind::STT);

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("column NAND updates every active lane and deposits energy") {
  const GateTable table(kStt);
  ArrayState a(4, 4);
  a.set(0, 0, true);
  a.set(1, 0, true);
  a.set(0, 1, true);
  EnergyAccumulator acc(4, 4);
  step(a, col_gate(GateKind::NAND2, {0, 1}, 2, LaneSet::range(0, 2)), table, acc);
  CHECK_FALSE(a.get(2, 0));
  CHECK(a.get(2, 1));
  CHECK(a.get(2, 2));
  CHECK_FALSE(a.get(2, 3));
  CHECK(acc.gate_lane_ops[static_cast<int>(GateKind::NAND2)] == 3);
  CHECK(acc.cell_energy[a.index(3, 0)] == 0.0);
  CHECK(acc.cell_energy[a.index(0, 3)] == 0.0);
  CHECK(acc.cell_energy[a.index(2, 0)] > 0.0);
  double expected = 0.0;
  expected += gate_outcome(kStt, GateKind::NAND2, {1, 1}, false).cycle_energy;
  expected += gate_outcome(kStt, GateKind::NAND2, {1, 0}, false).cycle_energy;
  expected += gate_outcome(kStt, GateKind::NAND2, {0, 0}, false).cycle_energy;
  CHECK(acc.total_energy == doctest::Approx(expected));
  CHECK(sum(acc.cell_energy) == doctest::Approx(expected));
}

TEST_CASE("row gates address columns") {
  const GateTable table(kStt);
  ArrayState a(3, 3);
  EnergyAccumulator acc(3, 3);
  step(a, row_gate(GateKind::NOT, {0}, 2, LaneSet::single(1)), table, acc);
  CHECK(a.get(1, 2));
  CHECK_FALSE(a.get(0, 2));
}

TEST_CASE("idle leaves state and energy untouched") {
  const GateTable table(kStt);
  ArrayState a(2, 2);
  a.set(1, 1, true);
  const auto before = a;
  EnergyAccumulator acc(2, 2);
  step(a, Idle{}, table, acc);
  CHECK(a == before);
  CHECK(sum(acc.cell_energy) == 0.0);
  CHECK(acc.idle_instructions == 1);
}

TEST_CASE("bulk set of 500 lanes") {
  const GateTable table(kStt);
  ArrayState a(8, 512);
  EnergyAccumulator acc(8, 512);
  step(a, BulkSet{Direction::Col, 3, LaneSet::range(0, 499), true}, table, acc);
  for (int c = 0; c < 512; ++c) CHECK(a.get(3, c) == (c < 500));
  CHECK(acc.bulk_cells == 500);
  CHECK(acc.total_energy == doctest::Approx(500 * write_outcome(kStt, false, true).cycle_energy));
}

TEST_CASE("serial write") {
  const GateTable table(kStt);
  ArrayState a(2, 2);
  EnergyAccumulator acc(2, 2);
  step(a, SerialWrite{1, 0, true}, table, acc);
  CHECK(a.get(1, 0));
  CHECK(acc.cell_energy[a.index(1, 0)] == doctest::Approx(write_outcome(kStt, false, true).cycle_energy));
}

TEST_CASE("malformed instructions are rejected") {
  CHECK_THROWS_AS(validate_instruction(col_gate(GateKind::NAND2, {0, 0}, 2, LaneSet::single(0)), 4, 4),
                  ExecutionError);
  CHECK_THROWS_AS(validate_instruction(col_gate(GateKind::NAND2, {0, 1}, 1, LaneSet::single(0)), 4, 4),
                  ExecutionError);
  CHECK_THROWS_AS(validate_instruction(col_gate(GateKind::NOT, {0}, 4, LaneSet::single(0)), 4, 4),
                  ExecutionError);
  CHECK_THROWS_AS(validate_instruction(col_gate(GateKind::NOT, {0}, 1, LaneSet::single(4)), 4, 4),
                  ExecutionError);
  CHECK_THROWS_AS(validate_instruction(SerialWrite{4, 0, true}, 4, 4), ExecutionError);
  CHECK_THROWS_AS(validate_instruction(BulkSet{Direction::Row, 9, LaneSet::single(0), true}, 4, 4),
                  ExecutionError);
}

TEST_CASE("one millisecond run retires 333333 instructions") {
  CHECK(active_cycles_for(1e-3, 3e-9) == 333333);
  const GateTable table(kStt);
  const Program p{col_gate(GateKind::NOT, {0}, 1, LaneSet::range(0, 31))};
  const auto r = run(p, ArrayState(256, 32), table, RunWindow{});
  CHECK(r.stats.active_instructions == 333333);
  CHECK(r.stats.cycles == 333333);
  CHECK(r.stats.gate_lane_ops[static_cast<int>(GateKind::NOT)] == 333333LL * 32);
  CHECK(r.stats.simulated_time == doctest::Approx(1e-3).epsilon(1e-5));
  CHECK(r.power.total_power() == doctest::Approx(r.stats.total_energy / r.stats.simulated_time));
}

TEST_CASE("duty cycle scales power linearly") {
  const GateTable table(kStt);
  Program p;
  p.emplace_back(col_gate(GateKind::NOT, {0}, 1, LaneSet::range(0, 15)));
  p.emplace_back(col_gate(GateKind::NAND2, {0, 1}, 2, LaneSet::range(0, 31)));
  ArrayState init(16, 32);
  for (int c = 0; c < 32; c += 3) init.set(0, c, true);
  const RunWindow full{1e-4, 1.0};
  const auto r1 = run(p, init, table, full);
  for (double d : {0.5, 0.25, 0.1}) {
    const auto rd = run(p, init, table, RunWindow{1e-4, d});
    CHECK(rd.stats.active_instructions == r1.stats.active_instructions);
    CHECK(rd.stats.total_energy == doctest::Approx(r1.stats.total_energy).epsilon(1e-12));
    CHECK(rd.power.total_power() == doctest::Approx(d * r1.power.total_power()).epsilon(1e-4));
    CHECK(rd.stats.realized_duty() == doctest::Approx(d).epsilon(1e-4));
    CHECK(rd.final_state == r1.final_state);
  }
}

TEST_CASE("runs are deterministic and conserve energy") {
  const GateTable table(kStt);
  Program p;
  p.emplace_back(col_gate(GateKind::MAJ3, {0, 1, 2}, 3, LaneSet::range(0, 7)));
  p.emplace_back(col_gate(GateKind::MAJ5, {0, 1, 2, 3, 4}, 5, LaneSet::range(2, 7)));
  p.emplace_back(SerialWrite{4, 3, true});
  p.emplace_back(Idle{});
  ArrayState init(8, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) init.set(r, c, (r * 7 + c * 3) % 5 < 2);
  const auto a = run(p, init, table, RunWindow{3e-6, 0.7});
  const auto b = run(p, init, table, RunWindow{3e-6, 0.7});
  CHECK(a.power.watts == b.power.watts);
  CHECK(a.final_state == b.final_state);
  CHECK(sum(a.power.watts) * a.stats.simulated_time == doctest::Approx(a.stats.total_energy).epsilon(1e-12));
}

TEST_CASE("short sim window") {
  const GateTable table(kStt);
  CHECK_THROWS_AS(run(Program{Idle{}}, ArrayState(2, 2), table, RunWindow{1e-9, 1.0}), ValidationError);
  CHECK_THROWS_AS(run(Program{}, ArrayState(2, 2), table, RunWindow{}), ExecutionError);
}

TEST_CASE("multi-array phases wait at barriers") {
  const GateTable table(kStt);
  ArrayPlan a{"a", ArrayState(4, 4), {}};
  ArrayPlan b{"b", ArrayState(4, 4), {}};
  const auto g = col_gate(GateKind::NOT, {0}, 1, LaneSet::range(0, 3));
  a.phases = {Program{g, g, g}, Program{}};
  b.phases = {Program{g}, Program{g}};
  const std::vector<ArrayPlan> plans{a, b};
  const auto r = multi_array_run(plans, table, 12 * 3e-9);
  CHECK(r.phase_lengths == std::vector<std::int64_t>{3, 1});
  CHECK(r.schedule_length == 4);
  CHECK(r.arrays[0].stats.active_instructions == 9);
  CHECK(r.arrays[0].stats.barrier_idle_cycles == 3);
  CHECK(r.arrays[1].stats.active_instructions == 6);
  CHECK(r.arrays[1].stats.barrier_idle_cycles == 6);

  b.phases.push_back(Program{});
  const std::vector<ArrayPlan> bad{a, b};
  CHECK_THROWS_AS(multi_array_run(bad, table, 1e-6), ValidationError);
}
