#include <cmath>
#include <map>
#include <utility>

#include "cimtherm/electrical.hpp"
#include "cimtherm/error.hpp"
#include "doctest.h"

using namespace cimtherm;

namespace {

const auto kStt = builtin_technology(TechKind::STT);
const auto kShe = builtin_technology(TechKind::SHE);

double par(double a, double b) { return a * b / (a + b); }

}  // namespace

TEST_CASE("input resistance") {
  CHECK(input_resistance(kStt, false) == doctest::Approx(3150.0));
  CHECK(input_resistance(kStt, true) == doctest::Approx(7340.0));
  CHECK(input_resistance(kShe, false) == doctest::Approx(253970.0 + 32000.0));
  CHECK(input_resistance(kShe, true) == doctest::Approx(507940.0 + 32000.0));
}

TEST_CASE("equivalent resistance") {
  CHECK(equivalent_resistance(kStt, {1, 1}, false) == doctest::Approx(par(7340, 7340) + 3150));
  CHECK(equivalent_resistance(kStt, {1, 1}, false) == doctest::Approx(6820.0));
  CHECK(equivalent_resistance(kStt, {0, 0}, false) == doctest::Approx(4725.0));
  CHECK(equivalent_resistance(kShe, {1, 1}, false) == doctest::Approx(539940.0 / 2 + 64000.0));
  CHECK(equivalent_resistance(kShe, {1, 1}, true) == equivalent_resistance(kShe, {1, 1}, false));
}

TEST_CASE("gate voltage table reproduces the reference within 1 mV") {
  const std::map<std::pair<TechKind, GateKind>, double> reference{
      {{TechKind::STT, GateKind::WRITE1}, 0.404}, {{TechKind::SHE, GateKind::WRITE1}, 0.211},
      {{TechKind::STT, GateKind::NOR2}, 0.252},   {{TechKind::SHE, GateKind::NOR2}, 0.687},
      {{TechKind::STT, GateKind::OR2}, 0.461},    {{TechKind::SHE, GateKind::OR2}, 0.687},
      {{TechKind::STT, GateKind::NAND2}, 0.304},  {{TechKind::SHE, GateKind::NAND2}, 0.877},
      {{TechKind::STT, GateKind::AND2}, 0.514},   {{TechKind::SHE, GateKind::AND2}, 0.877},
      {{TechKind::STT, GateKind::MAJ3}, 0.442},   {{TechKind::SHE, GateKind::MAJ3}, 0.570},
      {{TechKind::STT, GateKind::MAJ5}, 0.411},   {{TechKind::SHE, GateKind::MAJ5}, 0.417},
  };
  CHECK(reference.size() == 14);
  for (const auto& [key, volts] : reference) {
    const auto tech = builtin_technology(key.first);
    CAPTURE(to_string(key.second));
    CHECK(std::abs(derive_gate_voltage(tech, key.second) - volts) <= 1e-3);
  }
  // Boundary arithmetic for two entries, done by hand.
  CHECK(derive_gate_voltage(kStt, GateKind::NAND2) ==
        doctest::Approx(50e-6 * ((par(3150, 7340) + 3150) + (par(7340, 7340) + 3150)) / 2));
  CHECK(derive_gate_voltage(kStt, GateKind::WRITE0) == doctest::Approx(1.1 * 50e-6 * 7340));
}

TEST_CASE("NOT gate voltage follows the same boundary rule") {
  // Preset 0: input 0 must switch (R_P + R_P), input 1 must hold (R_AP + R_P).
  CHECK(derive_gate_voltage(kStt, GateKind::NOT) == doctest::Approx(50e-6 * (6300.0 + 10490.0) / 2));
  CHECK(derive_gate_voltage(kShe, GateKind::NOT) == doctest::Approx(1.431).epsilon(1e-3));
}

TEST_CASE("NAND2 outcomes reproduce the two-input truth table with current margins") {
  const double v = derive_gate_voltage(kStt, GateKind::NAND2);
  const auto o00 = gate_outcome(kStt, GateKind::NAND2, {0, 0}, true);
  CHECK(o00.output_current == doctest::Approx(v / 4725.0));
  CHECK(o00.output_current > kStt.i_crit);
  CHECK(o00.switched);
  CHECK(o00.new_output);
  CHECK(o00.gate_power == doctest::Approx(19.6e-6).epsilon(0.005));

  const auto o01 = gate_outcome(kStt, GateKind::NAND2, {0, 1}, false);
  const auto o10 = gate_outcome(kStt, GateKind::NAND2, {1, 0}, false);
  CHECK(o01.output_current > kStt.i_crit);
  CHECK(o01.output_current == doctest::Approx(o10.output_current));
  CHECK(o01.new_output);

  const auto o11 = gate_outcome(kStt, GateKind::NAND2, {1, 1}, false);
  CHECK(o11.output_current == doctest::Approx(44.6e-6).epsilon(0.005));
  CHECK(o11.output_current < kStt.i_crit);
  CHECK_FALSE(o11.switched);
  CHECK_FALSE(o11.new_output);

  const auto she11 = gate_outcome(kShe, GateKind::NAND2, {1, 1}, true);
  CHECK(she11.gate_power == doctest::Approx(2.30e-6).epsilon(0.005));
}

TEST_CASE("preset power uses the prior output state") {
  const double vw = write_voltage(kStt);
  const auto from0 = gate_outcome(kStt, GateKind::NAND2, {1, 1}, false);
  const auto from1 = gate_outcome(kStt, GateKind::NAND2, {1, 1}, true);
  CHECK(from0.preset_power == doctest::Approx(vw * vw / 3150.0));
  CHECK(from1.preset_power == doctest::Approx(vw * vw / 7340.0));
  CHECK(from0.cycle_energy == doctest::Approx((from0.preset_power + from0.gate_power) * 1e-9));
}

TEST_CASE("write outcomes") {
  const auto w01 = write_outcome(kStt, false, true);
  CHECK(w01.gate_power == doctest::Approx(51.8e-6).epsilon(0.005));
  CHECK(w01.cycle_energy == doctest::Approx(w01.gate_power * 1e-9));
  CHECK(w01.new_output);
  CHECK(w01.switched);
  const auto w11 = write_outcome(kStt, true, true);
  CHECK(w11.gate_power == doctest::Approx(22.2e-6).epsilon(0.005));
  CHECK_FALSE(w11.switched);
  for (int prior = 0; prior < 2; ++prior)
    for (int value = 0; value < 2; ++value)
      CHECK(write_outcome(kShe, prior, value).gate_power == doctest::Approx(0.696e-6).epsilon(0.005));
}

TEST_CASE("threshold decision equals the truth table for every gate and input") {
  for (const auto& tech : {kStt, kShe}) {
    for (GateKind g : kLogicGates) {
      const int n = arity(g);
      for (unsigned m = 0; m < (1u << n); ++m) {
        for (int prior = 0; prior < 2; ++prior) {
          const InputPattern p(m, n);
          GateOutcome o;
          REQUIRE_NOTHROW(o = gate_outcome(tech, g, p, prior != 0));
          CHECK(o.new_output == truth(g, p));
          CHECK(o.switched == (o.output_current >= tech.i_crit));
          CHECK(o.switched == (o.new_output != preset_bit(g)));
          CHECK(o.cycle_energy > 0.0);
        }
      }
    }
  }
}

TEST_CASE("STT output current never increases when an input flips 0 -> 1") {
  for (GateKind g : kLogicGates) {
    const int n = arity(g);
    for (unsigned m = 0; m < (1u << n); ++m) {
      for (int k = 0; k < n; ++k) {
        if (m & (1u << k)) continue;
        const auto lo = gate_outcome(kStt, g, InputPattern(m, n), false);
        const auto hi = gate_outcome(kStt, g, InputPattern(m | (1u << k), n), false);
        CHECK(hi.output_current <= lo.output_current);
      }
    }
  }
}

TEST_CASE("SHE NOR2/OR2 and NAND2/AND2 are electrically identical") {
  CHECK(derive_gate_voltage(kShe, GateKind::NOR2) == doctest::Approx(derive_gate_voltage(kShe, GateKind::OR2)));
  CHECK(derive_gate_voltage(kShe, GateKind::NAND2) == doctest::Approx(derive_gate_voltage(kShe, GateKind::AND2)));
  for (unsigned m = 0; m < 4; ++m) {
    const InputPattern p(m, 2);
    CHECK(gate_outcome(kShe, GateKind::NOR2, p, false).gate_power ==
          doctest::Approx(gate_outcome(kShe, GateKind::OR2, p, false).gate_power));
    CHECK(gate_outcome(kShe, GateKind::NAND2, p, false).gate_power ==
          doctest::Approx(gate_outcome(kShe, GateKind::AND2, p, false).gate_power));
  }
}

TEST_CASE("branch energies sum to the network energy") {
  for (const auto& tech : {kStt, kShe}) {
    for (GateKind g : kLogicGates) {
      const int n = arity(g);
      for (unsigned m = 0; m < (1u << n); ++m) {
        const InputPattern p(m, n);
        const auto e = branch_energies(tech, g, p);
        double sum = e.output_energy;
        for (int k = 0; k < n; ++k) sum += e.input_energy[k];
        CHECK(sum == doctest::Approx(gate_outcome(tech, g, p, false).gate_power * tech.t_sw).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("corrupted r_ap against reference voltages is a model inconsistency") {
  auto bad = kStt;
  bad.r_ap = 4.0e3;
  CHECK_THROWS_AS(gate_outcome(bad, GateKind::NAND2, {1, 1}, false, 0.304), ModelInconsistency);
  CHECK_NOTHROW(gate_outcome(kStt, GateKind::NAND2, {1, 1}, false, 0.304));
}

TEST_CASE("gate table agrees with direct evaluation") {
  const GateTable table(kStt);
  const auto& e = table.lookup(GateKind::NAND2, 0b00, true);
  const auto o = gate_outcome(kStt, GateKind::NAND2, {0, 0}, true);
  CHECK(e.new_output == o.new_output);
  CHECK(e.total_energy == doctest::Approx(o.cycle_energy));
  CHECK(e.preset_energy + e.output_energy + e.input_energy[0] + e.input_energy[1] ==
        doctest::Approx(o.cycle_energy));
  CHECK(table.lookup(GateKind::WRITE1, 0, false).total_energy ==
        doctest::Approx(write_outcome(kStt, false, true).cycle_energy));
}

TEST_CASE("wrong input count is rejected") {
  CHECK_THROWS_AS(gate_outcome(kStt, GateKind::NAND2, {1}, false), ExecutionError);
}
