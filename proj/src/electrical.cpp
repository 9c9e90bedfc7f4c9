#include "cimtherm/electrical.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <limits>
#include <string>

#include "cimtherm/error.hpp"

namespace cimtherm {

namespace {

constexpr std::array<std::string_view, kAllGates.size()> kGateNames{
    "WRITE0", "WRITE1", "NOT", "NOR2", "OR2", "NAND2", "AND2", "MAJ3", "MAJ5"};

bool is_write(GateKind g) { return g == GateKind::WRITE0 || g == GateKind::WRITE1; }

}  // namespace

std::string_view to_string(GateKind gate) { return kGateNames[static_cast<int>(gate)]; }

GateKind gate_kind_from_string(std::string_view text) {
  std::string upper(text);
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (upper == "INV") upper = "NOT";
  for (std::size_t i = 0; i < kGateNames.size(); ++i)
    if (kGateNames[i] == upper) return kAllGates[i];
  throw ParseError("unknown gate '" + std::string(text) + "'");
}

int arity(GateKind gate) {
  switch (gate) {
    case GateKind::WRITE0:
    case GateKind::WRITE1:
      return 0;
    case GateKind::NOT:
      return 1;
    case GateKind::NOR2:
    case GateKind::OR2:
    case GateKind::NAND2:
    case GateKind::AND2:
      return 2;
    case GateKind::MAJ3:
      return 3;
    case GateKind::MAJ5:
      return 5;
  }
  return 0;
}

bool preset_bit(GateKind gate) {
  switch (gate) {
    case GateKind::WRITE0:
    case GateKind::NOT:
    case GateKind::NOR2:
    case GateKind::NAND2:
      return false;
    default:
      return true;
  }
}

InputPattern::InputPattern(std::initializer_list<int> bits) {
  for (int b : bits) {
    if (b) mask |= 1u << count;
    ++count;
  }
}

int InputPattern::ones() const { return std::popcount(mask); }

bool truth(GateKind gate, InputPattern in) {
  switch (gate) {
    case GateKind::WRITE0:
      return false;
    case GateKind::WRITE1:
      return true;
    case GateKind::NOT:
      return !in.bit(0);
    case GateKind::NOR2:
      return !(in.bit(0) || in.bit(1));
    case GateKind::OR2:
      return in.bit(0) || in.bit(1);
    case GateKind::NAND2:
      return !(in.bit(0) && in.bit(1));
    case GateKind::AND2:
      return in.bit(0) && in.bit(1);
    case GateKind::MAJ3:
      return in.ones() >= 2;
    case GateKind::MAJ5:
      return in.ones() >= 3;
  }
  return false;
}

double input_resistance(const TechnologyParams& tech, bool bit) {
  const double mtj = bit ? tech.r_ap : tech.r_p;
  // SHE input current leaves through half of the Hall channel.
  return tech.r_she ? mtj + *tech.r_she / 2.0 : mtj;
}

double output_resistance(const TechnologyParams& tech, bool state) {
  if (tech.r_she) return *tech.r_she;
  return state ? tech.r_ap : tech.r_p;
}

double write_path_resistance(const TechnologyParams& tech, bool prior) {
  return output_resistance(tech, prior);
}

double equivalent_resistance(const TechnologyParams& tech, InputPattern inputs, bool output_state) {
  double g = 0.0;
  for (int k = 0; k < inputs.count; ++k) g += 1.0 / input_resistance(tech, inputs.bit(k));
  return 1.0 / g + output_resistance(tech, output_state);
}

double write_voltage(const TechnologyParams& tech) {
  const double worst = tech.r_she ? *tech.r_she : tech.r_ap;
  return 1.1 * tech.i_crit * worst;
}

double derive_gate_voltage(const TechnologyParams& tech, GateKind gate) {
  if (is_write(gate)) return write_voltage(tech);
  const int n = arity(gate);
  const bool preset = preset_bit(gate);
  double hardest_switch = -std::numeric_limits<double>::infinity();
  double easiest_hold = std::numeric_limits<double>::infinity();
  for (unsigned m = 0; m < (1u << n); ++m) {
    const InputPattern p(m, n);
    const double r = equivalent_resistance(tech, p, preset);
    if (truth(gate, p) != preset)
      hardest_switch = std::max(hardest_switch, r);
    else
      easiest_hold = std::min(easiest_hold, r);
  }
  if (!(hardest_switch < easiest_hold))
    throw ModelInconsistency(std::string(to_string(gate)) +
                             ": no gate voltage separates switching from holding inputs");
  return tech.i_crit * (hardest_switch + easiest_hold) / 2.0;
}

GateOutcome write_outcome(const TechnologyParams& tech, bool target_prior, bool value) {
  const double v = write_voltage(tech);
  const double r = write_path_resistance(tech, target_prior);
  GateOutcome o;
  o.new_output = value;
  o.switched = value != target_prior;
  o.output_current = v / r;
  o.gate_power = v * v / r;
  o.preset_power = 0.0;
  o.cycle_energy = o.gate_power * tech.t_sw;
  return o;
}

GateOutcome gate_outcome(const TechnologyParams& tech, GateKind gate, InputPattern inputs,
                         bool prior_output) {
  return gate_outcome(tech, gate, inputs, prior_output, derive_gate_voltage(tech, gate));
}

GateOutcome gate_outcome(const TechnologyParams& tech, GateKind gate, InputPattern inputs,
                         bool prior_output, double vg) {
  if (inputs.count != arity(gate))
    throw ExecutionError(std::string(to_string(gate)) + ": expected " + std::to_string(arity(gate)) +
                         " inputs, got " + std::to_string(inputs.count));
  if (is_write(gate)) return write_outcome(tech, prior_output, gate == GateKind::WRITE1);

  const bool preset = preset_bit(gate);
  const double vw = write_voltage(tech);
  const double r_eq = equivalent_resistance(tech, inputs, preset);

  GateOutcome o;
  o.preset_power = vw * vw / write_path_resistance(tech, prior_output);
  o.output_current = vg / r_eq;
  o.switched = o.output_current >= tech.i_crit;
  o.new_output = o.switched ? !preset : preset;
  o.gate_power = vg * vg / r_eq;
  o.cycle_energy = (o.preset_power + o.gate_power) * tech.t_sw;

  if (o.new_output != truth(gate, inputs))
    throw ModelInconsistency(std::string(to_string(gate)) + " input mask " +
                             std::to_string(inputs.mask) + ": current threshold gives " +
                             std::to_string(o.new_output) + ", truth table gives " +
                             std::to_string(truth(gate, inputs)));
  return o;
}

BranchEnergies branch_energies(const TechnologyParams& tech, GateKind gate, InputPattern inputs) {
  BranchEnergies e;
  if (is_write(gate)) return e;
  const bool preset = preset_bit(gate);
  const double vg = derive_gate_voltage(tech, gate);
  const double r_eq = equivalent_resistance(tech, inputs, preset);
  const double i_out = vg / r_eq;
  const double r_out = output_resistance(tech, preset);
  const double v_parallel = vg - i_out * r_out;
  for (int k = 0; k < inputs.count; ++k)
    e.input_energy[k] = v_parallel * v_parallel / input_resistance(tech, inputs.bit(k)) * tech.t_sw;
  e.output_energy = i_out * i_out * r_out * tech.t_sw;
  return e;
}

GateTable::GateTable(const TechnologyParams& tech) : tech_(tech) {
  tech_.validate();
  for (GateKind g : kAllGates) {
    const int gi = static_cast<int>(g);
    const int n = arity(g);
    voltage_[gi] = derive_gate_voltage(tech_, g);
    auto& table = entries_[gi];
    table.resize(std::size_t{2} << n);
    for (unsigned m = 0; m < (1u << n); ++m) {
      for (int prior = 0; prior < 2; ++prior) {
        const InputPattern p(m, n);
        const auto out = gate_outcome(tech_, g, p, prior != 0);
        Entry e;
        e.new_output = out.new_output;
        if (is_write(g)) {
          // Write current flows through the target cell only.
          e.output_energy = out.cycle_energy;
        } else {
          const auto split = branch_energies(tech_, g, p);
          e.preset_energy = out.preset_power * tech_.t_sw;
          e.output_energy = split.output_energy;
          e.input_energy = split.input_energy;
        }
        e.total_energy = out.cycle_energy;
        table[(m << 1) | static_cast<unsigned>(prior)] = e;
      }
    }
  }
}

}  // namespace cimtherm
