#include <algorithm>
#include <set>

#include "cimtherm/error.hpp"
#include "cimtherm/kernels.hpp"
#include "doctest.h"

using namespace cimtherm;

namespace {

ArrayState execute(const Program& p, ArrayState s) {
  for (const auto& ins : p) execute_logic(s, ins);
  return s;
}

std::int64_t count_gate(const Program& p, GateKind g) {
  std::int64_t n = 0;
  for (const auto& ins : p)
    if (const auto* op = std::get_if<GateOp>(&ins); op && op->gate == g) ++n;
  return n;
}

}  // namespace

TEST_CASE("INVfx on sm") {
  const auto k = gen_inv(256, 32, 1.0, true);
  CHECK(k.lanes == 32);
  REQUIRE(k.program.size() == 1);
  const auto& op = std::get<GateOp>(k.program[0]);
  CHECK(op.gate == GateKind::NOT);
  CHECK(op.lanes == LaneSet::range(0, 31));
  CHECK(gen_inv(256, 32, 0.25, true).lanes == 8);
  CHECK(execute(k.program, k.initial) == k.initial);
}

TEST_CASE("INVshft rotates over all rows") {
  const int rows = 16;
  const auto k = gen_inv(rows, 8, 0.5, false);
  REQUIRE(k.program.size() == rows);
  std::vector<int> seen(rows, 0);
  for (const auto& ins : k.program) {
    const auto& op = std::get<GateOp>(ins);
    seen[op.inputs[0]]++;
    seen[op.output]++;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 2; }));
  CHECK(execute(k.program, k.initial) == k.initial);
}

TEST_CASE("INVshft levels per-row energy") {
  const auto k = gen_inv(64, 32, 1.0, false);
  const GateTable table(builtin_technology(TechKind::STT));
  EnergyAccumulator acc(64, 32);
  ArrayState s = k.initial;
  for (const auto& ins : k.program) step(s, ins, table, acc);
  std::vector<double> per_row(64, 0.0);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 32; ++c) per_row[r] += acc.cell_energy[s.index(r, c)];
  const auto [lo, hi] = std::minmax_element(per_row.begin(), per_row.end());
  CHECK(*hi / *lo - 1.0 < 0.01);
}

TEST_CASE("vmul oracle") {
  CHECK(vmul_oracle({{1, 0}, {0, 1}}, {5, 9}) == std::vector<std::int64_t>{5, 9});
  CHECK(vmul_oracle({{1, 2}, {3, 4}}, {0, 0}) == std::vector<std::int64_t>{0, 0});
  CHECK(vmul_oracle({{1, 2}, {3, 4}}, {1, 1}) == std::vector<std::int64_t>{3, 7});
  CHECK_THROWS_AS(vmul_oracle({{1, 2}}, {1}), ValidationError);
}

TEST_CASE("1x1 VMUL computes 3*2") {
  for (auto adder : {AdderKind::Mix, AdderKind::Nor}) {
    const VmulSpec spec{1, 1, 4, adder};
    const auto k = gen_vmul(spec, VmulData{{{3}}, {2}}, 64, 1);
    CHECK(decode_vmul(k.layout, execute(k.program, k.initial)) == std::vector<std::int64_t>{6});
  }
}

TEST_CASE("VMUL matches the oracle on random 8x16 instances") {
  for (auto adder : {AdderKind::Mix, AdderKind::Nor}) {
    const VmulSpec spec{8, 16, 4, adder};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto d = random_vmul_data(spec, seed);
      const auto k = gen_vmul(spec, d, 256, 32);
      const auto out = decode_vmul(k.layout, execute(k.program, k.initial));
      REQUIRE(out == vmul_oracle(d.matrix, d.vector));
    }
  }
}

TEST_CASE("VMUL program is repeatable and its energy run agrees") {
  const VmulSpec spec{8, 16, 4, AdderKind::Mix};
  const auto d = random_vmul_data(spec, 42);
  const auto k = gen_vmul(spec, d, 256, 32);
  const GateTable table(builtin_technology(TechKind::STT));
  const double once = static_cast<double>(k.program.size()) * 3e-9;
  const auto r = run(k.program, k.initial, table, RunWindow{2 * once, 1.0});
  CHECK(decode_vmul(k.layout, r.final_state) == vmul_oracle(d.matrix, d.vector));
}

TEST_CASE("adder gate mix") {
  const VmulSpec mix{8, 16, 4, AdderKind::Mix};
  const VmulSpec nor{8, 16, 4, AdderKind::Nor};
  const auto d = random_vmul_data(mix, 3);
  const auto km = gen_vmul(mix, d, 256, 32);
  const auto kn = gen_vmul(nor, d, 256, 32);
  const std::int64_t fa_bits = 16LL * 4 * km.layout.acc_width;
  CHECK(count_gate(km.program, GateKind::MAJ3) == fa_bits);
  CHECK(count_gate(km.program, GateKind::MAJ5) == fa_bits);
  CHECK(count_gate(kn.program, GateKind::MAJ3) == 0);
  CHECK(count_gate(kn.program, GateKind::MAJ5) == 0);
  CHECK(count_gate(kn.program, GateKind::NOR2) == 9 * fa_bits);
  CHECK(decode_vmul(km.layout, execute(km.program, km.initial)) ==
        decode_vmul(kn.layout, execute(kn.program, kn.initial)));
}

TEST_CASE("VMUL footprint overflow") {
  CHECK_THROWS_AS(gen_vmul(VmulSpec{1, 40, 4, AdderKind::Mix}, random_vmul_data(VmulSpec{1, 40, 4}, 1), 256, 32),
                  ValidationError);
  const int n = vmul_max_vector_length(256, 4, AdderKind::Nor);
  CHECK(vmul_footprint(VmulSpec{1, n, 4, AdderKind::Nor}) <= 256);
  CHECK(vmul_footprint(VmulSpec{1, n + 1, 4, AdderKind::Nor}) > 256);
}

TEST_CASE("Hopfield oracle basics") {
  HopfieldInstance z;
  z.n = 5;
  z.weights.assign(25, 0);
  z.bias.assign(5, 0);
  z.state = {1, 0, 1, 1, 0};
  const auto t = hopfield_oracle(z);
  CHECK(t.converged);
  CHECK(t.sweeps == 1);
  CHECK(t.fixed_point == z.state);

  HopfieldInstance f;
  f.n = 2;
  f.weights = {0, 1, 1, 0};
  f.bias = {0, 0};
  f.state = {1, 0};
  const auto tf = hopfield_oracle(f);
  CHECK(tf.fixed_point == std::vector<std::uint8_t>{0, 0});
  f.state = {0, 1};
  CHECK(hopfield_oracle(f).fixed_point == std::vector<std::uint8_t>{1, 1});

  HopfieldInstance bad = f;
  bad.weights = {0, 1, 2, 0};
  CHECK_THROWS_AS(hopfield_oracle(bad), ValidationError);
  bad.weights = {1, 1, 1, 0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("Hopfield energy never increases") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = random_hopfield(12 + static_cast<int>(seed % 9), seed, 1 + static_cast<int>(seed % 3));
    const auto t = hopfield_oracle(inst);
    CHECK(t.converged);
    for (std::size_t k = 1; k < t.energy.size(); ++k) CHECK(t.energy[k] <= t.energy[k - 1] + 1e-9);
  }
}

TEST_CASE("in-array Hopfield follows the oracle update for update") {
  const KernelKind kinds[] = {KernelKind::NNmixblk, KernelKind::NNmixnoblk, KernelKind::NNmixrest,
                              KernelKind::NNnorblk, KernelKind::NNnornoblk, KernelKind::NNnorrest};
  for (auto kind : kinds) {
    CAPTURE(to_string(kind));
    for (std::uint64_t seed : {7u, 11u, 23u}) {
      const auto inst = random_hopfield(16, seed, seed == 23 ? 2 : 1);
      const auto oracle = hopfield_oracle(inst);
      const auto r = run_hopfield_single(inst, hopfield_variant(kind), 256, 32);
      CHECK(r.converged);
      CHECK(r.states == oracle.states);
      const auto m = run_hopfield_multi(inst, hopfield_variant(kind), 128, 32, 4);
      CHECK(m.converged);
      CHECK(m.states == oracle.states);
    }
  }
}

TEST_CASE("Hopfield fixed point needs one sweep") {
  HopfieldInstance h;
  h.n = 4;
  h.weights = {0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0};
  h.bias = {0, 0, 0, 0};
  h.state = {1, 1, 1, 1};
  const auto r = run_hopfield_single(h, {AdderKind::Mix, UpdateMode::Bulk}, 64, 4);
  CHECK(r.converged);
  CHECK(r.iterations == 4);
  CHECK(r.states.back() == h.state);
}

TEST_CASE("rest variants update one cell per instruction") {
  const auto inst = random_hopfield(16, 5);
  const auto r = run_hopfield_single(inst, hopfield_variant(KernelKind::NNnorrest), 256, 32);
  const auto& phases = r.arrays.front().phases;
  for (std::size_t p = kUpdate; p < phases.size(); p += kPhasesPerIteration)
    for (const auto& ins : phases[p]) CHECK(lane_count(ins) == 1);
}

TEST_CASE("recorded single-array trace replays to the same cells") {
  const auto inst = random_hopfield(12, 9);
  const auto r = run_hopfield_single(inst, hopfield_variant(KernelKind::NNmixnoblk), 128, 16);
  const auto prog = flatten(r.arrays.front());
  CHECK(execute(prog, r.arrays.front().initial) == r.final_arrays.front());
}

TEST_CASE("md multi-array plan uses 500 of 512 columns") {
  const auto inst = random_hopfield(500, 1);
  HopfieldLimits lim;
  lim.max_iterations = 1;
  const auto r = run_hopfield_multi(inst, hopfield_variant(KernelKind::NNmixblk), 512, 512, 4, lim);
  REQUIRE(r.arrays.size() == 5);
  for (int a = 0; a < 4; ++a) {
    CHECK(r.lanes_per_array[a] == 500);
    const auto& op = std::get<GateOp>(r.arrays[a].phases[kCompute].back());
    CHECK(op.lanes == LaneSet::range(0, 499));
  }
  CHECK(r.arrays[4].phases[kCompute].empty());
  CHECK(r.states.front() == hopfield_oracle(inst, 1).states.front());
}

TEST_CASE("workload from config reports realized utilization") {
  SimulationConfig c;
  c.kernel.kind = KernelKind::VMULmix;
  c.utilization = 0.25;
  auto w = build_workload(c);
  CHECK(w.lanes == 8);
  CHECK(w.realized_utilization == doctest::Approx(0.25));
  c.kernel.kind = KernelKind::NNmixblk;
  c.utilization = 1.0;
  c.sim_time = 3e-6;
  c.allow_short_sim = true;
  w = build_workload(c);
  CHECK(w.lanes == 32);
  CHECK(w.data_json.find("\"W\"") != std::string::npos);
}
