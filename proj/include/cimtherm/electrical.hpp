#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

#include "cimtherm/tech_params.hpp"

namespace cimtherm {

enum class GateKind : std::uint8_t { WRITE0, WRITE1, NOT, NOR2, OR2, NAND2, AND2, MAJ3, MAJ5 };

inline constexpr std::array<GateKind, 9> kAllGates{
    GateKind::WRITE0, GateKind::WRITE1, GateKind::NOT,  GateKind::NOR2, GateKind::OR2,
    GateKind::NAND2,  GateKind::AND2,   GateKind::MAJ3, GateKind::MAJ5};

inline constexpr std::array<GateKind, 7> kLogicGates{
    GateKind::NOT, GateKind::NOR2, GateKind::OR2, GateKind::NAND2,
    GateKind::AND2, GateKind::MAJ3, GateKind::MAJ5};

inline constexpr int kMaxArity = 5;

std::string_view to_string(GateKind gate);
GateKind gate_kind_from_string(std::string_view text);

int arity(GateKind gate);

/// Bit the output cell is written to before the gate pulse. Inverting gates
/// (NOT, NAND2, NOR2) preset 0; the others preset 1. WRITEx presets to x.
bool preset_bit(GateKind gate);

/// Input bits of one gate evaluation; bit k of `mask` is input k.
struct InputPattern {
  unsigned mask = 0;
  int count = 0;

  InputPattern() = default;
  InputPattern(unsigned m, int n) : mask(m), count(n) {}
  InputPattern(std::initializer_list<int> bits);

  bool bit(int k) const { return (mask >> k) & 1u; }
  int ones() const;
};

/// Boolean truth table of the gate.
bool truth(GateKind gate, InputPattern inputs);

/// Resistance seen by current entering through one input cell.
double input_resistance(const TechnologyParams& tech, bool bit);
/// Output branch resistance; for SHE this is the Hall channel regardless of state.
double output_resistance(const TechnologyParams& tech, bool state);
/// Resistance a write current crosses when the cell currently holds `prior`.
double write_path_resistance(const TechnologyParams& tech, bool prior);

/// (R_in1 || R_in2 || ...) + R_out.
double equivalent_resistance(const TechnologyParams& tech, InputPattern inputs, bool output_state);

double write_voltage(const TechnologyParams& tech);

/// Voltage placing I_crit midway (in resistance) between the hardest
/// must-switch and the easiest must-not-switch input configuration.
/// Throws ModelInconsistency when no separating voltage exists.
double derive_gate_voltage(const TechnologyParams& tech, GateKind gate);

struct GateOutcome {
  bool new_output = false;
  bool switched = false;
  double output_current = 0.0;
  double gate_power = 0.0;
  double preset_power = 0.0;
  double cycle_energy = 0.0;
};

/// Preset, then gate pulse. Throws ModelInconsistency when the current
/// threshold disagrees with the truth table.
GateOutcome gate_outcome(const TechnologyParams& tech, GateKind gate, InputPattern inputs,
                         bool prior_output);
/// Same, with an externally supplied gate voltage (e.g. a reference table).
GateOutcome gate_outcome(const TechnologyParams& tech, GateKind gate, InputPattern inputs,
                         bool prior_output, double v_gate);

GateOutcome write_outcome(const TechnologyParams& tech, bool target_prior, bool value);

/// Joule energy of one gate pulse split over the participating cells.
/// input_energy[k] is dissipated in input k's branch, output_energy in the
/// output branch; their sum equals gate_power * t_sw.
struct BranchEnergies {
  std::array<double, kMaxArity> input_energy{};
  double output_energy = 0.0;
};

BranchEnergies branch_energies(const TechnologyParams& tech, GateKind gate, InputPattern inputs);

/// Every (gate, input pattern, prior output) outcome precomputed for one
/// technology. Construction runs gate_outcome on every entry, so a table
/// only exists for parameters that pass the truth-table check.
class GateTable {
 public:
  struct Entry {
    bool new_output = false;
    double preset_energy = 0.0;
    double output_energy = 0.0;
    std::array<double, kMaxArity> input_energy{};
    double total_energy = 0.0;
  };

  explicit GateTable(const TechnologyParams& tech);

  const TechnologyParams& tech() const { return tech_; }
  double voltage(GateKind gate) const { return voltage_[static_cast<int>(gate)]; }

  const Entry& lookup(GateKind gate, unsigned input_mask, bool prior) const {
    return entries_[static_cast<int>(gate)][(input_mask << 1) | (prior ? 1u : 0u)];
  }

 private:
  TechnologyParams tech_;
  std::array<double, kAllGates.size()> voltage_{};
  std::array<std::vector<Entry>, kAllGates.size()> entries_;
};

}  // namespace cimtherm
